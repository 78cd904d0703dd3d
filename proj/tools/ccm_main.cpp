// ccm: clustering engine for categorical data based on mixtures with
// conditionally correlated (block-structured) components.
//
// Subcommands: fit, select, simulate, summarize, replay.
// Exit codes: 0 success, 2 input error, 3 numerical failure, 4 internal error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "ccm/bench.hpp"
#include "ccm/dataset.hpp"
#include "ccm/estim.hpp"
#include "ccm/manifest.hpp"
#include "ccm/model.hpp"
#include "ccm/select.hpp"
#include "ccm/svg.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using ccm::InputError;

namespace {

using Config = std::map<std::string, std::string>;

std::string now_iso8601() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string cfg_get(const Config& cfg, const std::string& key, const std::string& fallback = "") {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

int cfg_int(const Config& cfg, const std::string& key, int fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : std::stoi(it->second);
}

uint64_t cfg_u64(const Config& cfg, const std::string& key, uint64_t fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : std::stoull(it->second);
}

ccm::Dataset load_data(const Config& cfg) {
  const std::string path = cfg_get(cfg, "data");
  if (path.empty()) throw InputError("missing --data");
  ccm::CsvOptions opts;
  opts.header = cfg_get(cfg, "header", "0") == "1";
  std::optional<std::vector<ccm::SchemaColumn>> schema;
  if (const std::string sp = cfg_get(cfg, "schema"); !sp.empty()) schema = ccm::load_schema(sp);
  return ccm::load_csv(path, opts, schema);
}

ccm::StoppingRules rules_from(const Config& cfg) {
  ccm::StoppingRules rules;
  rules.r_max = cfg_int(cfg, "rmax", rules.r_max);
  rules.s_max = cfg_int(cfg, "smax", rules.s_max);
  rules.t_max = cfg_int(cfg, "tmax", rules.t_max);
  rules.q_max = cfg_int(cfg, "qmax", rules.q_max);
  return rules;
}

ccm::BlockPartition parse_sigma(const std::string& text, int g, const std::vector<int>& m) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("--sigma: invalid JSON: ") + e.what());
  }
  if (!doc.is_array() || doc.empty()) throw InputError("--sigma: expected a nested JSON array");
  try {
    if (doc[0].is_array() && !doc[0].empty() && doc[0][0].is_array()) {
      auto raw = doc.get<std::vector<ccm::BlockPartition::ComponentBlocks>>();
      if (static_cast<int>(raw.size()) != g)
        throw InputError("--sigma: component count does not match --g");
      return ccm::BlockPartition::canonical(std::move(raw), m);
    }
    auto tpl = doc.get<ccm::BlockPartition::ComponentBlocks>();
    return ccm::BlockPartition::replicate(tpl, g, m);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("--sigma: ") + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

ccm::RunManifest base_manifest(const std::string& command, const Config& cfg) {
  ccm::RunManifest m;
  m.command = command;
  m.timestamp = now_iso8601();
  for (const auto& [k, v] : cfg) m.config.emplace_back(k, v);
  return m;
}

void print_fit_row(const ccm::CcmModel& model) {
  std::printf("g=%d  loglik=%.4f  bic=%.4f  nu=%lld\n", model.g, model.meta->loglik,
              model.meta->bic, model.meta->nu);
}

int run_fit(const Config& cfg) {
  const ccm::Dataset data = load_data(cfg);
  const int g = cfg_int(cfg, "g", 0);
  if (g < 1) throw InputError("--g must be at least 1");
  const std::string out_dir = cfg_get(cfg, "out");
  if (out_dir.empty()) throw InputError("missing --out");
  fs::create_directories(out_dir);

  const uint64_t seed = cfg_u64(cfg, "seed", 0);
  const ccm::StoppingRules rules = rules_from(cfg);

  ccm::CcmModel model;
  std::string report;
  const auto t0 = std::chrono::steady_clock::now();
  if (const std::string sigma_text = cfg_get(cfg, "sigma"); !sigma_text.empty()) {
    const ccm::BlockPartition sigma = parse_sigma(sigma_text, g, data.modality_counts());
    ccm::Rng rng(seed);
    ccm::EstimOptions opts;
    opts.rules = rules;
    model = ccm::gem_fit(data, ccm::initial_model(data, g, sigma, rng), opts, rng);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::ordered_json rep;
    rep["per_g"] = nlohmann::ordered_json::array(
        {{{"g", g}, {"bic", model.meta->bic}, {"loglik", model.meta->loglik},
          {"nu", model.meta->nu}, {"seconds", secs}}});
    rep["best_g"] = g;
    rep["best_bic"] = model.meta->bic;
    report = rep.dump(2) + "\n";
  } else {
    ccm::SearchConfig sc;
    sc.g_min = sc.g_max = g;
    sc.chains = cfg_int(cfg, "chains", 20);
    sc.rules = rules;
    sc.seed = seed;
    sc.threads = cfg_int(cfg, "threads", 1);
    const ccm::SelectionResult sel = ccm::select_model(data, sc);
    model = sel.best().best.best_model;
    report = ccm::search_report_json(sel);
  }
  model.meta->seed = seed;

  const std::string model_path = (fs::path(out_dir) / "model.json").string();
  const std::string svg_path = (fs::path(out_dir) / "summary.svg").string();
  const std::string report_path = (fs::path(out_dir) / "report.json").string();
  ccm::save_model(model, model_path);
  ccm::save_summary_svg(model, svg_path);
  write_text(report_path, report);

  ccm::RunManifest man = base_manifest("fit", cfg);
  man.outputs.emplace_back("model", model_path);
  man.outputs.emplace_back("svg", svg_path);
  man.logs.emplace_back("report", report_path);
  ccm::save_manifest(man, (fs::path(out_dir) / "manifest.json").string());

  print_fit_row(model);
  return 0;
}

int run_select(const Config& cfg) {
  const ccm::Dataset data = load_data(cfg);
  const int g_max = cfg_int(cfg, "g_max", 0);
  if (g_max < 1) throw InputError("--g-max must be at least 1");
  const std::string out_dir = cfg_get(cfg, "out");
  if (out_dir.empty()) throw InputError("missing --out");
  fs::create_directories(out_dir);

  ccm::SearchConfig sc;
  sc.g_min = 1;
  sc.g_max = g_max;
  sc.chains = cfg_int(cfg, "chains", 20);
  sc.rules = rules_from(cfg);
  sc.seed = cfg_u64(cfg, "seed", 0);
  sc.threads = cfg_int(cfg, "threads", 1);

  const ccm::SelectionResult sel = ccm::select_model(data, sc);
  ccm::CcmModel model = sel.best().best.best_model;
  model.meta->seed = sc.seed;

  const std::string model_path = (fs::path(out_dir) / "model.json").string();
  const std::string svg_path = (fs::path(out_dir) / "summary.svg").string();
  const std::string report_path = (fs::path(out_dir) / "report.json").string();
  ccm::save_model(model, model_path);
  ccm::save_summary_svg(model, svg_path);
  write_text(report_path, ccm::search_report_json(sel));

  ccm::RunManifest man = base_manifest("select", cfg);
  man.outputs.emplace_back("model", model_path);
  man.outputs.emplace_back("svg", svg_path);
  man.logs.emplace_back("report", report_path);
  ccm::save_manifest(man, (fs::path(out_dir) / "manifest.json").string());

  for (const auto& gres : sel.per_g)
    std::printf("g=%d  bic=%.4f  nu=%lld  seconds=%.2f\n", gres.g, gres.best.best_bic,
                gres.best.best_model.meta->nu, gres.seconds);
  std::printf("best g=%d\n", sel.best().g);
  return 0;
}

ccm::CcmModel scenario_from_spec(const std::string& spec) {
  int d = -1;
  double u = -1.0;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("--scenario: expected key=value pairs");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "d")
      d = std::stoi(value);
    else if (key == "u")
      u = std::stod(value);
    else
      throw InputError("--scenario: unknown key '" + key + "'");
  }
  if (d < 0 || u < 0) throw InputError("--scenario: needs d=<even int>,u=<value in [0,1)>");
  return ccm::scenario_model(d, u);
}

int run_simulate(const Config& cfg) {
  const std::string model_path = cfg_get(cfg, "model");
  const std::string scenario = cfg_get(cfg, "scenario");
  if (model_path.empty() == scenario.empty())
    throw InputError("simulate: give exactly one of --model or --scenario");
  const ccm::CcmModel model =
      model_path.empty() ? scenario_from_spec(scenario) : ccm::load_model(model_path);

  const int n = cfg_int(cfg, "n", -1);
  if (n < 0) throw InputError("--n must be nonnegative");
  const uint64_t seed = cfg_u64(cfg, "seed", 0);
  const std::string out_dir = cfg_get(cfg, "out");
  if (out_dir.empty()) throw InputError("missing --out");
  fs::create_directories(out_dir);

  const std::string data_path = (fs::path(out_dir) / "data.csv").string();
  const std::string schema_path = (fs::path(out_dir) / "schema.json").string();
  const std::string truth_path = (fs::path(out_dir) / "truth.json").string();

  nlohmann::ordered_json truth;
  truth["model"] = nlohmann::ordered_json::parse(ccm::model_to_json(model));
  if (n == 0) {
    std::string header;
    for (int j = 1; j <= model.d(); ++j) header += (j > 1 ? ",V" : "V") + std::to_string(j);
    write_text(data_path, header + "\n");
    nlohmann::ordered_json schema = nlohmann::ordered_json::array();
    for (int j = 1; j <= model.d(); ++j) {
      std::vector<std::string> labels;
      for (int h = 1; h <= model.m[j - 1]; ++h) labels.push_back(std::to_string(h));
      schema.push_back({{"name", "V" + std::to_string(j)}, {"modalities", labels}});
    }
    write_text(schema_path, schema.dump(2) + "\n");
    truth["labels"] = nlohmann::ordered_json::array();
    truth["y"] = nlohmann::ordered_json::array();
  } else {
    ccm::Rng rng(seed);
    const ccm::SampleResult draw = ccm::sample(model, n, rng);
    ccm::save_csv(draw.data, data_path);
    write_text(schema_path, ccm::schema_json(draw.data));
    truth["labels"] = draw.labels;
    truth["y"] = draw.y;
  }
  write_text(truth_path, truth.dump(2) + "\n");

  ccm::RunManifest man = base_manifest("simulate", cfg);
  man.outputs.emplace_back("data", data_path);
  man.outputs.emplace_back("schema", schema_path);
  man.outputs.emplace_back("truth", truth_path);
  ccm::save_manifest(man, (fs::path(out_dir) / "manifest.json").string());

  std::printf("wrote %s (n=%d, d=%d)\n", data_path.c_str(), n, model.d());
  return 0;
}

int run_summarize(const Config& cfg) {
  const std::string model_path = cfg_get(cfg, "model");
  if (model_path.empty()) throw InputError("missing --model");
  const std::string out_path = cfg_get(cfg, "out");
  if (out_path.empty()) throw InputError("missing --out");
  const ccm::CcmModel model = ccm::load_model(model_path);
  if (const auto parent = fs::path(out_path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  ccm::save_summary_svg(model, out_path);

  ccm::RunManifest man = base_manifest("summarize", cfg);
  man.outputs.emplace_back("svg", out_path);
  ccm::save_manifest(man, out_path + ".manifest.json");
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int dispatch(const std::string& command, const Config& cfg) {
  if (command == "fit") return run_fit(cfg);
  if (command == "select") return run_select(cfg);
  if (command == "simulate") return run_simulate(cfg);
  if (command == "summarize") return run_summarize(cfg);
  throw InputError("unknown command '" + command + "'");
}

int run_replay(const std::string& manifest_path) {
  const ccm::RunManifest man = ccm::load_manifest(manifest_path);
  Config cfg;
  for (const auto& [k, v] : man.config) cfg[k] = v;
  return dispatch(man.command, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clustering for categorical data with conditionally correlated mixtures"};
  app.require_subcommand(1);

  Config cfg;
  auto add_common = [&cfg](CLI::App* cmd) {
    cmd->add_option_function<std::string>("--data", [&cfg](const std::string& v) { cfg["data"] = v; },
                                          "input CSV file");
    cmd->add_flag_callback("--header", [&cfg]() { cfg["header"] = "1"; },
                           "first CSV row holds variable names");
    cmd->add_option_function<std::string>("--schema", [&cfg](const std::string& v) { cfg["schema"] = v; },
                                          "JSON schema declaring the modalities per column");
    cmd->add_option_function<std::string>("--seed", [&cfg](const std::string& v) { cfg["seed"] = v; },
                                          "random seed");
    cmd->add_option_function<std::string>("--chains", [&cfg](const std::string& v) { cfg["chains"] = v; },
                                          "independent search chains (default 20)");
    cmd->add_option_function<std::string>("--qmax", [&cfg](const std::string& v) { cfg["qmax"] = v; },
                                          "search stall limit (default 20*d)");
    cmd->add_option_function<std::string>("--rmax", [&cfg](const std::string& v) { cfg["rmax"] = v; },
                                          "GEM iterations (default 10)");
    cmd->add_option_function<std::string>("--smax", [&cfg](const std::string& v) { cfg["smax"] = v; },
                                          "Metropolis-Hastings moves per block update (default 1)");
    cmd->add_option_function<std::string>("--tmax", [&cfg](const std::string& v) { cfg["tmax"] = v; },
                                          "inner EM iterations (default 5)");
    cmd->add_option_function<std::string>("--threads", [&cfg](const std::string& v) { cfg["threads"] = v; },
                                          "worker threads for chains (default 1)");
    cmd->add_option_function<std::string>("--out", [&cfg](const std::string& v) { cfg["out"] = v; },
                                          "output directory");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit a model at fixed g");
  add_common(fit);
  fit->add_option_function<std::string>("--g", [&cfg](const std::string& v) { cfg["g"] = v; },
                                        "number of components")->required();
  fit->add_option_function<std::string>(
      "--sigma", [&cfg](const std::string& v) { cfg["sigma"] = v; },
      "explicit block partition (JSON nested lists); skips the structure search");

  CLI::App* select = app.add_subcommand("select", "search models over g = 1..g_max");
  add_common(select);
  select->add_option_function<std::string>("--g-max", [&cfg](const std::string& v) { cfg["g_max"] = v; },
                                           "largest number of components")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "draw a dataset from a model");
  add_common(simulate);
  simulate->add_option_function<std::string>("--model", [&cfg](const std::string& v) { cfg["model"] = v; },
                                             "model file to sample from");
  simulate->add_option_function<std::string>(
      "--scenario", [&cfg](const std::string& v) { cfg["scenario"] = v; },
      "built-in scenario spec, e.g. d=4,u=0.3");
  simulate->add_option_function<std::string>("--n", [&cfg](const std::string& v) { cfg["n"] = v; },
                                             "rows to draw")->required();

  CLI::App* summarize = app.add_subcommand("summarize", "render the SVG cluster summary");
  summarize->add_option_function<std::string>("--model", [&cfg](const std::string& v) { cfg["model"] = v; },
                                              "model file")->required();
  summarize->add_option_function<std::string>("--out", [&cfg](const std::string& v) { cfg["out"] = v; },
                                              "output SVG path")->required();

  std::string manifest_path;
  CLI::App* replay = app.add_subcommand("replay", "re-run a recorded manifest");
  replay->add_option("--manifest", manifest_path, "manifest file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(replay)) return run_replay(manifest_path);
    for (CLI::App* cmd : {fit, select, simulate, summarize})
      if (app.got_subcommand(cmd)) return dispatch(cmd->get_name(), cfg);
    throw InputError("no subcommand given");
  } catch (const ccm::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const ccm::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 4;
  }
}
