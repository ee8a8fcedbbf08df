#include "mbi/csv.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mbi/error.hpp"
#include "mbi/text.hpp"

namespace mbi {

CsvWriter::CsvWriter(std::ostream& out, bool timestamp) : out_(out) {
  out_ << std::setprecision(10);
  if (timestamp) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    out_ << "# generated " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << '\n';
  }
}

void CsvWriter::header(std::initializer_list<std::string_view> columns) {
  bool first = true;
  for (auto c : columns) {
    if (!first) out_ << ',';
    out_ << c;
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

void CsvWriter::separator() {
  if (!first_) out_ << ',';
  first_ = false;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(Errc::io, "cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, ',');
    for (auto& f : fields) f = trim(f);
    if (!have_header) {
      table.columns = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != table.columns.size())
        throw_error(Errc::parse, path.string() + ": row has " + std::to_string(fields.size()) +
                                     " fields, header has " + std::to_string(table.columns.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw_error(Errc::parse, path.string() + ": missing header");
  return table;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw_error(Errc::parse, "missing csv column " + std::string(name));
}

}  // namespace mbi
