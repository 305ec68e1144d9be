#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnncert/certifier.hpp"
#include "bnncert/model.hpp"
#include "bnncert/spec.hpp"

namespace bnncert {

/// Malformed or inconsistent input document. The message carries
/// "source:line: path: reason".
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& source, std::size_t line, const std::string& path, const std::string& reason);
  std::size_t line() const { return line_; }
  const std::string& path() const { return path_; }

 private:
  std::size_t line_;
  std::string path_;
};

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kReportVersion = 1;

BnnModel parse_model(const std::string& text, const std::string& source = "<model>");
BnnModel load_model(const std::filesystem::path& path);

/// Writes every number in shortest round-trip form, so reloading is bit-exact.
std::string dump_model(const BnnModel& model, const nlohmann::json& metadata = nlohmann::json::object());
void save_model(const std::filesystem::path& path, const BnnModel& model,
                const nlohmann::json& metadata = nlohmann::json::object());

struct Property {
  InputRegion region;
  SafetySpec spec;
};

/// Parses a property document; with `model` given, shapes are checked
/// against it.
Property parse_property(const std::string& text, const std::string& source = "<property>",
                        const BnnModel* model = nullptr);
Property load_property(const std::filesystem::path& path, const BnnModel* model = nullptr);

/// Weight boxes for the `measure` command: {"boxes": [[[lo, hi], ...], ...]}.
std::vector<IntervalBox> parse_weight_boxes(const std::string& text, const std::string& source = "<boxes>");
std::vector<IntervalBox> load_weight_boxes(const std::filesystem::path& path);

nlohmann::json config_to_json(const CertifyConfig& cfg);
nlohmann::json result_to_json(const CertificationResult& r, bool include_timing);

struct SweepRow {
  CheckMethod method = CheckMethod::IBP;
  std::size_t n_samples = 0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  double p_lower = 0.0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double seconds = 0.0;
};

inline constexpr const char* kSweepHeader = "method,N,gamma,seed,p_lower,accepted,rejected,seconds";
std::string sweep_csv_line(const SweepRow& row);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace bnncert
