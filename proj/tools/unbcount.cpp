// unbcount: fit, regress, compare, simulate and summarize count data.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unb/dataset.hpp"
#include "unb/distributions.hpp"
#include "unb/errors.hpp"
#include "unb/estimation.hpp"
#include "unb/regression.hpp"

namespace {

using nlohmann::json;
using namespace unb;

constexpr int kSchemaVersion = 1;
constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitConvergence = 3;

struct Options {
  std::string input;
  std::string response;
  std::vector<std::string> covariates;
  std::vector<std::string> models;
  std::string group_by;
  std::string delimiter = ",";
  bool no_header = false;
  std::uint64_t seed = 0;
  double level = 0.95;
  int max_iterations = OptimOptions{}.max_iterations;
  std::string format = "text";
  std::string output;
  double r = 0.0;
  double p = 0.0;
  std::size_t n = 0;
};

// A rendered report: text for people, JSON for programs. Non-converged fits
// raise the exit code after the report is written.
struct Report {
  std::ostringstream text;
  json doc;
  int exit_code = kExitOk;
};

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string row(const std::vector<std::string>& cells, std::size_t first = 16, std::size_t rest = 13) {
  std::string out = "  ";
  for (std::size_t i = 0; i < cells.size(); ++i) out += pad(cells[i], i == 0 ? first : rest);
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out + "\n";
}

std::string level_label(double level, const char* side) {
  return std::string(side) + " " + num(100 * level) + "%";
}

CsvOptions csv_options(const Options& o) {
  CsvOptions c;
  if (o.delimiter == "," || o.delimiter == "comma") c.delimiter = ',';
  else if (o.delimiter == ";" || o.delimiter == "semicolon") c.delimiter = ';';
  else if (o.delimiter == "tab" || o.delimiter == "\\t" || o.delimiter == "\t") c.delimiter = '\t';
  else throw DataError("--delimiter must be one of ',', ';' or 'tab'");
  c.header = !o.no_header;
  return c;
}

std::string resolve_response(const Options& o, const CsvOptions& csv) {
  if (!o.response.empty()) return o.response;
  const auto header = read_csv_header(o.input, csv);
  if (header.size() == 1) return header.front();
  throw DataError("--response is required when the input has more than one column");
}

Dataset load(const Options& o, std::string& response, std::vector<std::string> extra = {}) {
  if (o.input.empty()) throw DataError("--input is required");
  const auto csv = csv_options(o);
  response = resolve_response(o, csv);
  for (const auto& c : o.covariates) extra.push_back(c);
  return load_csv(o.input, response, extra, csv);
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("--level must lie in (0, 1)");
}

json data_json(const std::string& response, const MomentSummary& m) {
  return {{"response", response},
          {"n", m.n},
          {"mean", m.m1},
          {"variance", m.sample_variance},
          {"dispersion_index", m.dispersion_index ? json(*m.dispersion_index) : json(nullptr)},
          {"zero_proportion", m.zero_proportion}};
}

void data_text(std::ostream& out, const std::string& response, const MomentSummary& m) {
  out << "response " << response << ": n " << m.n << ", mean " << num(m.m1) << ", variance "
      << num(m.sample_variance) << ", dispersion index " << (m.dispersion_index ? num(*m.dispersion_index) : "NA")
      << ", zero proportion " << num(m.zero_proportion) << "\n";
}

void note_convergence(Report& rep, const std::string& what, bool converged, int iterations) {
  if (converged) return;
  const std::string msg = what + " did not converge after " + std::to_string(iterations) + " iterations";
  rep.text << "warning: " << msg << "\n";
  rep.doc["warnings"].push_back(msg);
  rep.exit_code = kExitConvergence;
}

// ---- fit -------------------------------------------------------------------

OptimOptions optim_options(const Options& o) {
  if (o.max_iterations < 1) throw DomainError("--max-iterations must be at least 1");
  OptimOptions opt;
  opt.max_iterations = o.max_iterations;
  return opt;
}

DistributionFit fit_distribution(const std::string& model, const std::vector<Count>& y, const Options& o) {
  const double level = o.level;
  if (model == "unb") return summarize_fit(fit_mle(y, std::nullopt, level, optim_options(o)));
  if (model == "nb") return fit_nb_mle(y, level, optim_options(o));
  if (model == "up") return fit_up_mle(y, level, optim_options(o));
  if (model == "geometric") return fit_geometric_mle(y, level);
  throw DataError("unknown model '" + model + "' (expected unb, nb, up or geometric)");
}

Report cmd_fit(const Options& o) {
  check_level(o.level);
  std::string response;
  const auto data = load(o, response);
  const auto y = data.counts(response);
  const auto moments = sample_moments(y);
  const auto models = o.models.empty() ? std::vector<std::string>{"unb"} : o.models;

  Report rep;
  rep.doc = {{"schema_version", kSchemaVersion}, {"command", "fit"}, {"level", o.level},
             {"data", data_json(response, moments)}, {"fits", json::array()}};
  data_text(rep.text, response, moments);
  for (const auto& model : models) {
    const auto fit = fit_distribution(model, y, o);
    json params = json::array();
    rep.text << "\nmodel " << model << " (" << (fit.converged ? "converged" : "not converged") << ", "
             << fit.iterations << " iterations)\n";
    rep.text << row({"parameter", "estimate", "std.error", level_label(o.level, "lower"), level_label(o.level, "upper")});
    for (Eigen::Index i = 0; i < fit.estimates.size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double se = fit.std_errors ? (*fit.std_errors)[i] : std::nan("");
      const double lo = k < fit.conf_intervals.size() ? fit.conf_intervals[k].lower : std::nan("");
      const double hi = k < fit.conf_intervals.size() ? fit.conf_intervals[k].upper : std::nan("");
      rep.text << row({fit.parameter_names[k], num(fit.estimates[i]), num(se), num(lo), num(hi)});
      params.push_back({{"name", fit.parameter_names[k]}, {"estimate", fit.estimates[i]}, {"std_error", num_json(se)},
                        {"ci_lower", num_json(lo)}, {"ci_upper", num_json(hi)}});
    }
    rep.text << "  log-likelihood " << num(fit.log_likelihood) << ", AIC " << num(fit.aic) << "\n";
    json entry = {{"model", model},       {"parameters", params},         {"log_likelihood", fit.log_likelihood},
                  {"aic", fit.aic},       {"converged", fit.converged}, {"iterations", fit.iterations}};
    if (model == "unb") {
      const auto lr = lr_test_geometric(y);
      rep.text << "  LR test against the geometric case r = 2: statistic " << num(lr.statistic) << ", df "
               << lr.df << ", p-value " << num(lr.p_value) << "\n";
      entry["lr_test_geometric"] = {{"statistic", lr.statistic},
                                    {"df", lr.df},
                                    {"p_value", lr.p_value},
                                    {"restricted_log_likelihood", lr.restricted_loglik},
                                    {"full_log_likelihood", lr.full_loglik}};
    }
    note_convergence(rep, "model " + model, fit.converged, fit.iterations);
    rep.doc["fits"].push_back(entry);
  }
  return rep;
}

// ---- regress -----------------------------------------------------------------

json regression_json(const RegressionFit& fit) {
  json coefs = json::array();
  const auto k = fit.beta.size();
  for (Eigen::Index i = 0; i < fit.std_errors.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    const bool is_r = i >= k;
    coefs.push_back({{"name", is_r ? std::string("r") : fit.coefficient_names[u]},
                     {"estimate", is_r ? *fit.r : fit.beta[i]},
                     {"std_error", num_json(fit.std_errors[i])},
                     {"wald", num_json(fit.wald_t[i])},
                     {"p_value", num_json(fit.p_values[i])},
                     {"ci_lower", num_json(fit.conf_intervals[u].lower)},
                     {"ci_upper", num_json(fit.conf_intervals[u].upper)}});
  }
  return {{"model", to_string(fit.model)},
          {"n", fit.n},
          {"coefficients", coefs},
          {"r", fit.r ? json(*fit.r) : json(nullptr)},
          {"log_likelihood", fit.log_likelihood},
          {"aic", fit.aic},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"gradient_norm", fit.gradient_norm},
          {"diagnostics", fit.diagnostics}};
}

void regression_text(std::ostream& out, const RegressionFit& fit, const std::string& response) {
  out << "model " << to_string(fit.model) << ", response " << response << ", n " << fit.n << " ("
      << (fit.converged ? "converged" : "not converged") << ", " << fit.iterations << " iterations)\n";
  out << row({"coefficient", "estimate", "std.error", "wald", "p-value", level_label(fit.level, "lower"),
              level_label(fit.level, "upper")});
  const auto k = fit.beta.size();
  for (Eigen::Index i = 0; i < fit.std_errors.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    const bool is_r = i >= k;
    out << row({is_r ? std::string("r") : fit.coefficient_names[u], num(is_r ? *fit.r : fit.beta[i]),
                num(fit.std_errors[i]), num(fit.wald_t[i]), num(fit.p_values[i]), num(fit.conf_intervals[u].lower),
                num(fit.conf_intervals[u].upper)});
  }
  out << "  log-likelihood " << num(fit.log_likelihood) << ", AIC " << num(fit.aic) << ", gradient norm "
      << num(fit.gradient_norm) << "\n";
  for (const auto& d : fit.diagnostics) out << "  note: " << d << "\n";
}

std::vector<CountModel> parse_models(const std::vector<std::string>& names, const char* fallback) {
  std::vector<CountModel> out;
  if (names.empty()) out.push_back(parse_count_model(fallback));
  for (const auto& n : names) out.push_back(parse_count_model(n));
  return out;
}

Report cmd_regress(const Options& o) {
  check_level(o.level);
  if (o.covariates.empty()) throw DataError("--covariates is required for regress");
  std::string response;
  const auto data = load(o, response);
  const auto design = build_design(data, {response, o.covariates});
  Report rep;
  rep.doc = {{"schema_version", kSchemaVersion}, {"command", "regress"}, {"response", response},
             {"level", o.level}, {"fits", json::array()}};
  bool first = true;
  for (const auto model : parse_models(o.models, "unb")) {
    const auto fit = fit_regression(model, design, o.level, optim_options(o));
    if (!first) rep.text << "\n";
    first = false;
    regression_text(rep.text, fit, response);
    note_convergence(rep, "model " + to_string(model), fit.converged, fit.iterations);
    rep.doc["fits"].push_back(regression_json(fit));
  }
  return rep;
}

// ---- compare -----------------------------------------------------------------

Report cmd_compare(const Options& o) {
  check_level(o.level);
  const auto models = parse_models(o.models, "unb");
  if (models.size() < 2 || models.size() > 3) {
    throw DataError("compare needs two or three models; the first is the reference");
  }
  std::string response;
  const auto data = load(o, response);
  const auto design = build_design(data, {response, o.covariates});

  Report rep;
  std::vector<RegressionFit> fits;
  std::vector<Eigen::VectorXd> pmfs;
  for (const auto model : models) {
    fits.push_back(fit_regression(model, design, o.level, optim_options(o)));
    pmfs.push_back(fitted_pmf(fits.back(), design));
  }
  rep.doc = {{"schema_version", kSchemaVersion}, {"command", "compare"}, {"response", response},
             {"covariates", o.covariates},         {"models", json::array()}, {"vuong", json::array()}};
  rep.text << "response " << response << ", n " << design.y.size() << ", "
           << (o.covariates.empty() ? std::string("no covariates") : std::to_string(o.covariates.size()) + " covariates")
           << "\n";
  rep.text << row({"model", "parameters", "log-lik", "AIC", "converged"});
  for (const auto& f : fits) {
    const auto k = f.std_errors.size();
    rep.text << row({to_string(f.model), std::to_string(k), num(f.log_likelihood), num(f.aic),
                     f.converged ? "yes" : "no"});
    rep.doc["models"].push_back({{"model", to_string(f.model)},
                                 {"parameters", k},
                                 {"log_likelihood", f.log_likelihood},
                                 {"aic", f.aic},
                                 {"converged", f.converged}});
  }
  rep.text << "\nVuong tests against " << to_string(models[0]) << "\n";
  rep.text << row({"comparison", "z", "omega", "p-value", "preferred"}, 16);
  for (std::size_t j = 1; j < fits.size(); ++j) {
    const auto label = to_string(models[0]) + " vs " + to_string(models[j]);
    json entry = {{"reference", to_string(models[0])}, {"other", to_string(models[j])}};
    try {
      const auto v = vuong_test(pmfs[0], pmfs[j]);
      const std::string preferred =
          v.p_value >= 1 - o.level ? "neither" : (v.z > 0 ? to_string(models[0]) : to_string(models[j]));
      rep.text << row({label, num(v.z), num(v.omega), num(v.p_value), preferred}, 16);
      entry.update({{"degenerate", false}, {"z", v.z}, {"omega", v.omega}, {"p_value", v.p_value},
                    {"n", v.n}, {"preferred", preferred}});
    } catch (const DegenerateComparisonError& e) {
      rep.text << "  " << pad(label, 16) << "notice: " << e.what() << "\n";
      entry.update({{"degenerate", true}, {"message", e.what()}});
    }
    rep.doc["vuong"].push_back(entry);
  }
  for (const auto& f : fits) note_convergence(rep, "model " + to_string(f.model), f.converged, f.iterations);
  return rep;
}

// ---- simulate ----------------------------------------------------------------

Report cmd_simulate(const Options& o) {
  if (o.output.empty()) throw DataError("simulate requires --output");
  if (o.n < 1) throw DomainError("--n must be at least 1");
  const UnbParams params(o.r, o.p);
  const auto xs = unb_sample(params, o.n, o.seed);

  std::ofstream out(o.output, std::ios::binary);
  if (!out) throw DataError("cannot write '" + o.output + "'");
  for (Count x : xs) out << x << '\n';
  if (!out.flush()) throw DataError("write to '" + o.output + "' failed");

  const std::string sidecar_path = o.output + ".json";
  const json sidecar = {{"schema_version", kSchemaVersion},
                        {"command", "simulate"},
                        {"distribution", "unb"},
                        {"params", {{"r", o.r}, {"p", o.p}}},
                        {"n", o.n},
                        {"seed", o.seed},
                        {"output", std::filesystem::path(o.output).filename().string()}};
  std::ofstream side(sidecar_path, std::ios::binary);
  if (!side || !(side << sidecar.dump(2) << '\n')) throw DataError("cannot write '" + sidecar_path + "'");

  Report rep;
  rep.doc = sidecar;
  rep.doc["sidecar"] = std::filesystem::path(sidecar_path).filename().string();
  rep.text << "wrote " << o.n << " draws from UNB(r = " << num(o.r) << ", p = " << num(o.p) << ") with seed "
           << o.seed << " to " << o.output << " (parameters in " << sidecar_path << ")\n";
  return rep;
}

// ---- summarize ---------------------------------------------------------------

Report cmd_summarize(const Options& o) {
  std::string response;
  std::vector<std::string> extra;
  if (!o.group_by.empty()) extra.push_back(o.group_by);
  const auto data = load(o, response, extra);
  std::optional<std::string> group;
  if (!o.group_by.empty()) group = o.group_by;

  Report rep;
  rep.doc = {{"schema_version", kSchemaVersion}, {"command", "summarize"}, {"response", response},
             {"group_by", group ? json(*group) : json(nullptr)}, {"groups", json::array()},
             {"frequencies", json::array()}, {"covariates", json::array()}};

  auto table = [&](const SummaryReport& s, json& sink) {
    rep.text << row({"group", "n", "max", "min", "mean", "variance", "ID", "zero share"}, 16, 11);
    for (const auto& g : s.groups) {
      rep.text << row({g.group_label, std::to_string(g.n), std::to_string(g.max), std::to_string(g.min), num(g.mean),
                       num(g.variance), g.dispersion_index ? num(*g.dispersion_index) : "NA",
                       num(g.zero_proportion)},
                      16, 11);
      sink.push_back({{"label", g.group_label},
                      {"n", g.n},
                      {"max", g.max},
                      {"min", g.min},
                      {"mean", g.mean},
                      {"variance", g.variance},
                      {"dispersion_index", g.dispersion_index ? json(*g.dispersion_index) : json(nullptr)},
                      {"zero_proportion", g.zero_proportion}});
    }
  };
  const auto overall = summarize(data, response);
  rep.text << "response " << response << "\n";
  table(overall, rep.doc["groups"]);
  if (group) {
    rep.text << "\ngrouped by " << *group << "\n";
    table(summarize(data, response, group), rep.doc["groups"]);
  }
  rep.text << "\nrelative frequencies\n" << row({"value", "count", "relative"}, 16, 11);
  for (const auto& f : overall.frequencies) {
    rep.text << row({std::to_string(f.value), std::to_string(f.count), num(f.relative)}, 16, 11);
    rep.doc["frequencies"].push_back({{"value", f.value}, {"count", f.count}, {"relative", f.relative}});
  }
  if (!o.covariates.empty()) {
    rep.text << "\ncovariates\n" << row({"name", "mean", "stdev"}, 16, 11);
    for (const auto& c : covariate_summary(data, o.covariates)) {
      rep.text << row({c.name, num(c.mean), num(c.stdev)}, 16, 11);
      rep.doc["covariates"].push_back({{"name", c.name}, {"mean", c.mean}, {"stdev", c.stdev}});
    }
  }
  return rep;
}

// ---- driver ------------------------------------------------------------------

void emit(const Report& rep, const Options& o, bool to_file) {
  const std::string body = o.format == "json" ? rep.doc.dump(2) + "\n" : rep.text.str();
  if (!to_file) {
    std::cout << body;
    return;
  }
  std::ofstream out(o.output, std::ios::binary);
  if (!out || !(out << body)) throw DataError("cannot write '" + o.output + "'");
}

void add_data_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--input,-i", o.input, "Delimited input file with a header row")->required();
  cmd->add_option("--response,-y", o.response, "Count column (optional for single-column files)");
  cmd->add_option("--delimiter", o.delimiter, "Field delimiter: ',', ';' or 'tab'");
  cmd->add_flag("--no-header", o.no_header, "The input has no header row; columns are V1, V2, ...");
}

void add_fit_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--level", o.level, "Confidence level");
  cmd->add_option("--max-iterations", o.max_iterations, "Optimizer iteration budget");
  cmd->add_option("--seed", o.seed, "Random seed (the fits themselves are deterministic)");
}

void add_output_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--format,-f", o.format, "Output format")->check(CLI::IsMember({"text", "json"}));
  cmd->add_option("--output,-o", o.output, "Write the report to this file instead of stdout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uniform negative binomial count models: fitting, regression and comparison"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "unbcount 0.1.0");
  Options o;

  auto* fit = app.add_subcommand("fit", "Fit distributions to a count column");
  add_data_options(fit, o);
  fit->add_option("--models,-m", o.models, "Models among unb, nb, up, geometric")->delimiter(',');
  add_fit_options(fit, o);
  add_output_options(fit, o);

  auto* regress = app.add_subcommand("regress", "Log-link count regression");
  add_data_options(regress, o);
  regress->add_option("--covariates,-x", o.covariates, "Covariate columns")->delimiter(',')->required();
  regress->add_option("--models,-m", o.models, "Models among unb, nb, up")->delimiter(',');
  add_fit_options(regress, o);
  add_output_options(regress, o);

  auto* compare = app.add_subcommand("compare", "AIC table and Vuong tests against the first model");
  add_data_options(compare, o);
  compare->add_option("--covariates,-x", o.covariates, "Covariate columns (none: intercept only)")->delimiter(',');
  compare->add_option("--models,-m", o.models, "Two or three of unb, nb, up; the first is the reference")
      ->delimiter(',')
      ->required();
  add_fit_options(compare, o);
  add_output_options(compare, o);

  auto* simulate = app.add_subcommand("simulate", "Draw a UNB sample, one count per line");
  simulate->add_option("--r", o.r, "Dispersion r > 0")->required();
  simulate->add_option("--p", o.p, "Probability p in (0, 1)")->required();
  simulate->add_option("--n", o.n, "Sample size")->required();
  simulate->add_option("--seed", o.seed, "Random seed");
  simulate->add_option("--output,-o", o.output, "Count file; parameters go to <output>.json")->required();
  simulate->add_option("--format,-f", o.format, "Report format")->check(CLI::IsMember({"text", "json"}));

  auto* summ = app.add_subcommand("summarize", "Descriptive summaries and relative frequencies");
  add_data_options(summ, o);
  summ->add_option("--group-by,-g", o.group_by, "Grouping column");
  summ->add_option("--covariates,-x", o.covariates, "Covariates to describe by mean and stdev")->delimiter(',');
  add_output_options(summ, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    Report rep;
    bool to_file = !o.output.empty();
    if (fit->parsed()) rep = cmd_fit(o);
    else if (regress->parsed()) rep = cmd_regress(o);
    else if (compare->parsed()) rep = cmd_compare(o);
    else if (summ->parsed()) rep = cmd_summarize(o);
    else {
      rep = cmd_simulate(o);
      to_file = false;
    }
    emit(rep, o, to_file);
    std::cout.flush();
    if (rep.exit_code == kExitConvergence) std::cerr << "unbcount: convergence failure; see the warnings above\n";
    return rep.exit_code;
  } catch (const NonConvergenceError& e) {
    std::cerr << "unbcount: convergence failure: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const Error& e) {
    std::cerr << "unbcount: error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "unbcount: error: " << e.what() << "\n";
    return kExitInput;
  }
}
