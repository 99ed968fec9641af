// qflatlab: analyze metric documents, run the verification suite, sweep a
// parameter, list the gallery.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "qflat/suite.hpp"

namespace {

using nlohmann::json;

constexpr int kOk = 0, kInput = 1, kNumeric = 2;

json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qflat::InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw qflat::SchemaError("", std::string("invalid JSON: ") + e.what());
  }
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
      throw qflat::InputError("not a number in --values: '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

void list_gallery() {
  for (const auto& e : qflat::gallery_entries()) {
    std::cout << e.name << ": " << e.summary << "\n";
    for (const auto& p : e.params) {
      std::cout << "  " << p.name << " = " << p.default_value << "  [" << p.lo << ", " << p.hi << "]";
      if (!p.note.empty()) std::cout << "  " << p.note;
      std::cout << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformally flat metrics on R^n: potentials, curvature, volume entropy and normality"};
  app.require_subcommand(1);

  std::string spec_path, out_path, filter, param, values;
  std::uint64_t seed = 1;
  bool as_json = false;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  auto* analyze = app.add_subcommand("analyze", "Normality report for a metric document");
  analyze->add_option("--spec", spec_path, "metric document (JSON)")->required();
  analyze->add_option("--out", out_path, "write the report here instead of stdout");
  analyze->add_option("--seed", seed, "sampling seed");

  auto* verify = app.add_subcommand("verify", "Run the verification suite");
  verify->add_option("--filter", filter, "case group or id substring");
  verify->add_flag("--json", as_json, "print the summary as JSON");
  verify->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Analyze a template over parameter values, CSV out");
  sweep->add_option("--param", param, "parameter name")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--spec", spec_path, "template document (JSON)")->required();
  sweep->add_option("--seed", seed, "sampling seed");

  auto* gallery = app.add_subcommand("gallery", "Built-in metric families");
  gallery->add_subcommand("list", "List families and parameter ranges");
  gallery->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    qflat::AnalysisConfig cfg;
    cfg.seed = seed;
    if (*analyze) {
      const auto report = qflat::run_analysis(read_document(spec_path), cfg);
      const std::string text = report.to_json().dump(2) + "\n";
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(out_path);
        if (!out) throw qflat::InputError("cannot write " + out_path);
        out << text;
      }
      return kOk;
    }
    if (*verify) {
      auto line = [as_json](const qflat::VerificationCase& c) {
        if (!as_json) {
          std::cout << c.status << "  " << c.id << "  (" << c.seconds << " s)";
          if (!c.error.empty()) std::cout << "  " << c.error;
          std::cout << std::endl;
        }
      };
      const auto summary = qflat::run_verification_suite(filter, workers, line);
      if (as_json) {
        std::cout << summary.to_json().dump(2) << "\n";
      } else {
        std::cout << summary.passed << " passed, " << summary.failed << " failed, " << summary.inconclusive
                  << " inconclusive in " << summary.seconds << " s\n";
      }
      return summary.exit_code();
    }
    if (*sweep) {
      std::cout << qflat::sweep_csv(param, parse_values(values), read_document(spec_path), cfg);
      return kOk;
    }
    list_gallery();
    return kOk;
  } catch (const qflat::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const qflat::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
}
