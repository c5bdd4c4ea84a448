#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lmrmt {

/// Shortest round-trip decimal representation ('.' separator, locale-free).
std::string format_double(double value);

/// RFC 4180 writer: CRLF line endings, fields quoted only when needed.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void row(const std::vector<std::string>& fields);
  void row(std::initializer_list<std::string_view> fields);

  /// Mixed-type convenience: numbers go through format_double / std::to_string.
  template <class... Args>
  void values(const Args&... args) {
    row(std::vector<std::string>{field(args)...});
  }

 private:
  static std::string field(double v) { return format_double(v); }
  static std::string field(std::size_t v) { return std::to_string(v); }
  static std::string field(int v) { return std::to_string(v); }
  static std::string field(const std::string& v) { return v; }
  static std::string field(const char* v) { return v; }

  std::ostream& os_;
};

nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Eigen::MatrixXd& m);  ///< row-major array of arrays
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Writes `content` to a sibling temporary and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// path with its extension replaced by `suffix` appended to the stem,
/// e.g. ("k.json", "_functions.csv") -> "k_functions.csv".
std::filesystem::path sibling_path(const std::filesystem::path& path, std::string_view suffix);

}  // namespace lmrmt
