#include "graspinfer/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "graspinfer/errors.hpp"

namespace graspinfer {

std::string format_double(double value) {
  // Shortest representation that parses back to the same double.
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows) {
  if (static_cast<Eigen::Index>(header.size()) != rows.cols())
    throw ContractViolation("write_csv: header size does not match column count");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      if (c) out << ',';
      out << format_double(rows(r, c));
    }
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing: " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty CSV");
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) table.header.push_back(cell);

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected a number, got '" +
                         cell + "'");
      }
    }
    if (row.size() != table.header.size())
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " cells, got " +
                       std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  table.rows.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

void write_sample_batch_csv(const std::string& path, const SampleBatch& batch) {
  const int retained = batch.retained_per_chain();
  const Eigen::Index dim = batch.draws.cols();
  Eigen::MatrixXd rows(batch.draws.rows(), dim + 2);
  for (int c = 0; c < batch.config.chains; ++c) {
    for (int t = 0; t < retained; ++t) {
      const Eigen::Index r = static_cast<Eigen::Index>(c) * retained + t;
      rows(r, 0) = c;
      rows(r, 1) = t;
      rows.row(r).tail(dim) = batch.draws.row(r);
    }
  }
  std::vector<std::string> header = {"chain", "transition"};
  for (Eigen::Index j = 0; j < dim; ++j) header.push_back("c" + std::to_string(j));
  write_csv(path, header, rows);
}

LoadedDraws read_sample_batch_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() < 3 || table.header[0] != "chain" || table.header[1] != "transition")
    throw ParseError(path + ": expected columns chain, transition, c0...");
  LoadedDraws out;
  out.coords = table.rows.rightCols(table.rows.cols() - 2);
  int chains = 0;
  for (Eigen::Index r = 0; r < table.rows.rows(); ++r)
    chains = std::max(chains, static_cast<int>(table.rows(r, 0)) + 1);
  out.chains = std::max(chains, 1);
  out.retained = out.chains > 0 ? static_cast<int>(table.rows.rows()) / out.chains : 0;
  return out;
}

void KeyValueDoc::set(const std::string& key, const std::string& value) { entries_[key] = value; }
void KeyValueDoc::set(const std::string& key, double value) { entries_[key] = format_double(value); }
void KeyValueDoc::set(const std::string& key, std::int64_t value) {
  entries_[key] = std::to_string(value);
}
void KeyValueDoc::set(const std::string& key, std::uint64_t value) {
  entries_[key] = std::to_string(value);
}
void KeyValueDoc::set(const std::string& key, int value) { entries_[key] = std::to_string(value); }

bool KeyValueDoc::contains(const std::string& key) const { return entries_.count(key) > 0; }

const std::string& KeyValueDoc::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::string KeyValueDoc::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValueDoc::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: " + get(key));
  }
}

std::int64_t KeyValueDoc::get_int(const std::string& key) const {
  try {
    return std::stoll(get(key));
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: " + get(key));
  }
}

std::string KeyValueDoc::to_string() const {
  std::ostringstream out;
  for (const auto& [key, value] : entries_) out << key << " = " << value << '\n';
  return out.str();
}

KeyValueDoc KeyValueDoc::parse(const std::string& text, const std::string& source_name) {
  KeyValueDoc doc;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      // blank lines allowed
      bool blank = true;
      for (char ch : line)
        if (!std::isspace(static_cast<unsigned char>(ch))) blank = false;
      if (blank) continue;
      throw ParseError(source_name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError(source_name + ":" + std::to_string(line_no) + ": empty key");
    doc.entries_[key] = value;
  }
  return doc;
}

KeyValueDoc KeyValueDoc::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void KeyValueDoc::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << to_string();
  if (!out) throw ConfigError("failed writing: " + path);
}

}  // namespace graspinfer
