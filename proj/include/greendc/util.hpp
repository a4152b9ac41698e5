#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace greendc {

// Seeded generator whose derived distributions are implemented here so that
// draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a tag.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

bool parse_double(std::string_view text, double& out);
// Shortest representation that parses back to the same double.
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the row starts
  std::vector<std::string> fields;
};

// RFC-4180: comma separated, double-quoted fields may contain commas, quotes
// ("" escapes) and line breaks. CRLF and LF line endings are accepted.
std::vector<CsvRow> parse_csv_rows(const std::string& text);
std::string csv_field(const std::string& value);

}  // namespace greendc
