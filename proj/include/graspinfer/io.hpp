#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "graspinfer/mcmc.hpp"

namespace graspinfer {

/// Shortest round-trip decimal form of a double (stable across reruns).
std::string format_double(double value);

/// Writes a CSV with a header row; rows are formatted with format_double.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows);

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd rows;
};

CsvTable read_csv(const std::string& path);

/// Draws CSV: chain, transition, then one column per ambient coordinate.
void write_sample_batch_csv(const std::string& path, const SampleBatch& batch);

/// Reads a draws CSV back into (matrix of coordinates, chain count); layout
/// must be chain-major as written by write_sample_batch_csv.
struct LoadedDraws {
  Eigen::MatrixXd coords;
  int chains = 1;
  int retained = 0;
};
LoadedDraws read_sample_batch_csv(const std::string& path);

/// Flat ordered key=value document used for config echoes and reports.
/// Round-trips exactly: parse(to_string(c)) == c.
class KeyValueDoc {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value);

  bool contains(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  bool operator==(const KeyValueDoc& o) const { return entries_ == o.entries_; }

  std::string to_string() const;
  static KeyValueDoc parse(const std::string& text, const std::string& source_name = "<config>");
  static KeyValueDoc load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace graspinfer
