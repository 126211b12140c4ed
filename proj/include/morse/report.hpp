#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "morse/index_fem.hpp"
#include "morse/spectral_flow.hpp"

namespace morse {

enum class BuiltinGenerator {
  kConstantCurvature,
  kProduct,
  kLorentzianCausal,
  kJacobiFrame,
  kCustomPolynomial,
};

enum class OutputKind { kMaslov, kFocal, kIndexTheorem, kProfile, kJumpValidator };

struct JumpRequest {
  FormCurve curve;
  double t0 = 0.0;
};

struct RunConfig {
  std::string name;
  SystemData system;
  Distribution distribution;
  std::optional<Subspace> q;  // variable endpoint
  MatrixXd sq;
  std::vector<OutputKind> outputs;
  IndexOptions index;
  std::vector<double> profile_times;
  int profile_mesh = 64;
  std::optional<JumpRequest> jump;
  std::uint64_t seed = 0;
};

// Command-line overrides applied on top of the document.
struct Overrides {
  std::optional<int> mesh;
  std::optional<int> steps;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
};

// Throws Error(kParse) on malformed documents, Error(kInvalidInput or
// kHypothesis) if the described system is invalid.
RunConfig parse_config(const nlohmann::json& doc, const Overrides& ov = {});
RunConfig load_config(const std::string& path, const Overrides& ov = {});

enum class ExitStatus { kOk = 0, kParse = 2, kInvariant = 3, kNonConvergence = 4 };

struct Report {
  std::string name;
  int status = 0;
  std::string error;
  nlohmann::json body;  // sections keyed by output name
};

Report run(const RunConfig& config);

enum class Format { kText, kStructured };

// Structured output is a JSON document with sorted keys; integers are exact
// and floats round-trip.
std::string emit_report(const Report& report, Format format);
std::string emit_reports(const std::vector<Report>& reports, Format format);
Report parse_report(const std::string& structured);

int exit_status_for(const Error& e);

}  // namespace morse
