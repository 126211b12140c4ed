// morse-index: Maslov index, focal instants and index-theorem terms for
// Morse-Sturm and linear symplectic systems described by JSON configs.

#include <algorithm>
#include <fstream>
#include <future>
#include <iostream>

#include <CLI11.hpp>

#include "morse/errors.hpp"
#include "morse/report.hpp"

namespace {

morse::Report run_one(const std::string& path, const morse::Overrides& ov) {
  try {
    return morse::run(morse::load_config(path, ov));
  } catch (const morse::Error& e) {
    morse::Report r;
    r.name = path;
    r.status = morse::exit_status_for(e);
    r.error = std::string(morse::to_string(e.kind())) + ": " + e.what();
    r.body = nlohmann::json::object();
    return r;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Index-theorem calculator for Morse-Sturm and symplectic systems"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Evaluate one or more configuration files");

  std::vector<std::string> configs;
  std::optional<int> mesh, steps;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::string format = "text";
  std::string out_path;
  bool batch = false;
  run->add_option("config", configs, "Configuration file(s)")->required()->check(CLI::ExistingFile);
  run->add_option("--mesh", mesh, "Initial number of finite elements")->check(CLI::Range(2, 1 << 20));
  run->add_option("--steps", steps, "Integrator steps")->check(CLI::Range(4, 1 << 24));
  run->add_option("--tol", tol, "Crossing tolerance on the smallest singular value")->check(CLI::PositiveNumber);
  run->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "structured"}));
  run->add_option("--seed", seed, "Seed for the complement search");
  run->add_option("--out", out_path, "Write the report to this file instead of stdout");
  run->add_flag("--batch", batch, "Evaluate the configurations in parallel");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(morse::ExitStatus::kParse);
  }

  morse::Overrides ov{mesh, steps, tol, seed};
  std::vector<morse::Report> reports;
  if (batch && configs.size() > 1) {
    std::vector<std::future<morse::Report>> jobs;
    for (const auto& c : configs) jobs.push_back(std::async(std::launch::async, run_one, c, ov));
    for (auto& j : jobs) reports.push_back(j.get());
  } else {
    for (const auto& c : configs) reports.push_back(run_one(c, ov));
  }

  auto fmt = format == "structured" ? morse::Format::kStructured : morse::Format::kText;
  std::string text = morse::emit_reports(reports, fmt);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write " << out_path << "\n";
      return static_cast<int>(morse::ExitStatus::kParse);
    }
    out << text;
  }
  int status = 0;
  for (const auto& r : reports) status = std::max(status, r.status);
  for (const auto& r : reports)
    if (!r.error.empty()) std::cerr << r.name << ": " << r.error << "\n";
  return status;
}
