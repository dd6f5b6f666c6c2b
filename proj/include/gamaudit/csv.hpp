#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gamaudit::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC-4180 style: comma separated, double-quoted fields may contain commas,
// newlines and doubled quotes. A trailing newline is optional; CRLF accepted.
Table parse(std::string_view text);
Table read_file(const std::string& path);

std::string escape(std::string_view field);

}  // namespace gamaudit::csv
