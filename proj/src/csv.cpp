#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dln/data.hpp"
#include "dln/errors.hpp"

namespace dln {

namespace {

bool is_missing_token(const std::string& cell) {
  static const std::set<std::string> tokens = {"", "?", "NA", "N/A", "na", "NaN", "nan", "null", "NULL"};
  return tokens.count(cell) != 0;
}

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos)
    return {};
  auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

std::optional<double> parse_number(const std::string& cell) {
  std::string s = trim(cell);
  if (is_missing_token(s))
    return std::nullopt;
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s.front() == '+')
    ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    return std::nullopt;
  return value;
}

}  // namespace

const char* to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous:
      return "continuous";
    case ColumnKind::categorical:
      return "categorical";
    case ColumnKind::target:
      return "target";
  }
  return "?";
}

ColumnKind column_kind_from_string(const std::string& text) {
  if (text == "continuous")
    return ColumnKind::continuous;
  if (text == "categorical")
    return ColumnKind::categorical;
  if (text == "target")
    return ColumnKind::target;
  throw FormatError("unknown column kind '" + text + "'");
}

bool RawColumn::missing(std::size_t row) const {
  if (kind == ColumnKind::categorical)
    return !labels[row].has_value();
  return !numbers[row].has_value();
}

const RawColumn* RawTable::find(const std::string& name) const {
  for (const auto& col : columns)
    if (col.name == name)
      return &col;
  return nullptr;
}

std::optional<std::size_t> RawTable::target_index() const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].kind == ColumnKind::target)
      return i;
  return std::nullopt;
}

CsvDocument parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A blank line is not a record.
    if (!(record.size() == 1 && record.front().empty()))
      records.push_back(std::move(record));
    record.clear();
  };

  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
      } else {
        field.push_back(c);
      }
      ++i;
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' || c == '\n') {
      end_record();
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
        ++i;
    } else {
      field.push_back(c);
      field_started = true;
    }
    ++i;
  }
  if (in_quotes)
    throw DataError("unterminated quoted field");
  if (field_started || !field.empty() || !record.empty())
    end_record();

  CsvDocument doc;
  if (records.empty())
    throw DataError("CSV has no header row");
  doc.header = std::move(records.front());
  for (auto& name : doc.header)
    name = trim(name);
  // Strip a UTF-8 byte-order mark from the first header cell.
  if (!doc.header.empty() && doc.header[0].rfind("\xEF\xBB\xBF", 0) == 0)
    doc.header[0].erase(0, 3);
  doc.rows.assign(std::make_move_iterator(records.begin() + 1),
                  std::make_move_iterator(records.end()));
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    if (doc.rows[r].size() != doc.header.size())
      throw DataError("row " + std::to_string(r + 2) + " has " +
                      std::to_string(doc.rows[r].size()) + " fields, header has " +
                      std::to_string(doc.header.size()));
  }
  return doc;
}

std::string format_csv_field(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos)
    return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"')
      out += "\"\"";
    else
      out.push_back(c);
  }
  out += '"';
  return out;
}

RawTable make_raw_table(const CsvDocument& doc, const ColumnHints& hints, TargetPolicy target) {
  std::set<std::string> seen;
  for (const auto& name : doc.header) {
    if (!seen.insert(name).second)
      throw DataError("duplicate column '" + name + "'");
  }
  for (const auto& [name, kind] : hints) {
    if (seen.count(name))
      continue;
    if (kind != ColumnKind::target)
      throw DataError("column '" + name + "' not found in header");
    if (target == TargetPolicy::required)
      throw DataError("target column '" + name + "' absent");
  }

  RawTable table;
  table.n_rows = doc.rows.size();
  for (std::size_t c = 0; c < doc.header.size(); ++c) {
    RawColumn col;
    col.name = doc.header[c];
    auto hint = hints.find(col.name);
    if (hint != hints.end()) {
      col.kind = hint->second;
    } else {
      bool numeric = true;
      for (const auto& row : doc.rows) {
        std::string cell = trim(row[c]);
        if (!is_missing_token(cell) && !parse_number(cell)) {
          numeric = false;
          break;
        }
      }
      col.kind = numeric ? ColumnKind::continuous : ColumnKind::categorical;
    }
    if (col.kind == ColumnKind::categorical) {
      col.labels.reserve(table.n_rows);
      for (const auto& row : doc.rows) {
        std::string cell = trim(row[c]);
        if (is_missing_token(cell))
          col.labels.emplace_back(std::nullopt);
        else
          col.labels.emplace_back(std::move(cell));
      }
    } else {
      col.numbers.reserve(table.n_rows);
      for (const auto& row : doc.rows)
        col.numbers.push_back(parse_number(row[c]));
    }
    table.columns.push_back(std::move(col));
  }

  auto n_targets = std::count_if(table.columns.begin(), table.columns.end(),
                                 [](const RawColumn& c) { return c.kind == ColumnKind::target; });
  if (n_targets > 1)
    throw DataError("more than one target column");
  if (n_targets == 0 && target == TargetPolicy::required)
    throw DataError("target column absent");
  return table;
}

RawTable load_csv(const std::filesystem::path& path, const ColumnHints& hints, TargetPolicy target) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad())
    throw IoError("error while reading '" + path.string() + "'");
  return make_raw_table(parse_csv(buffer.str()), hints, target);
}

}  // namespace dln
