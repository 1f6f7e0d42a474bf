// glance: command-line front end for the gaze estimator and the ROI pipeline
// simulator. Machine-readable results go to stdout (JSON) or files; progress
// and diagnostics go to stderr.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "glance/glance.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace glance;

namespace {

int verbosity = 1;

void note(const std::string& s) {
  if (verbosity > 0) std::cerr << s << '\n';
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("GLANCE_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("GLANCE_SEED is not a non-negative integer: ") + s);
  }
}

// Creates `dir` if needed and refuses to clobber existing outputs.
void prepare_outputs(const fs::path& dir, const std::vector<std::string>& files, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
  fs::create_directories(dir);
  if (force) return;
  for (const auto& f : files)
    if (fs::exists(dir / f)) throw ConfigError((dir / f).string() + " already exists (use --force to overwrite)");
}

void prepare_file(const fs::path& file, bool force) {
  if (!force && fs::exists(file)) throw ConfigError(file.string() + " already exists (use --force to overwrite)");
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << s;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

ordered_json eval_json(const dwn::EvalStats& s) {
  if (s.count == 0) return {{"count", 0}, {"mean_deg", nullptr}, {"median_deg", nullptr}, {"degenerate", 0}};
  return {{"count", s.count}, {"mean_deg", s.mean_deg}, {"median_deg", s.median_deg}, {"degenerate", s.degenerate}};
}

dwn::DwnConfig load_model_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return dwn::config_from_json(j, "model");
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out;
  int per_cluster = 120;
  int subjects = 4;
  int size = 56;
  double noise = 0.05;
  bool force = false;
};

int cmd_gen(const GenArgs& a, std::optional<std::uint64_t> seed) {
  SyntheticGazeConfig cfg;
  cfg.samples_per_cluster = a.per_cluster;
  cfg.subjects = a.subjects;
  cfg.input_size = a.size;
  cfg.pixel_noise = a.noise;
  if (seed) cfg.seed = *seed;
  if (cfg.samples_per_cluster < 1 || cfg.subjects < 1 || cfg.input_size < 4)
    throw ConfigError("gen-gaze-data: per-cluster, subjects must be >= 1 and size >= 4");
  prepare_outputs(a.out, {"index.csv"}, a.force);
  const auto samples = make_synthetic_gaze(cfg);
  write_gaze_dataset(a.out, samples);
  std::cout << ordered_json{{"out", a.out}, {"samples", samples.size()}, {"seed", cfg.seed}}.dump() << '\n';
  return 0;
}

struct FitArgs {
  std::string data, out, model_config, holdout;
  bool resize = false, force = false;
};

int cmd_fit(const FitArgs& a, std::optional<std::uint64_t> seed) {
  auto cfg = load_model_config(a.model_config);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  const auto all = load_gaze_dataset(a.data, cfg.input_size, a.resize);
  const auto split = split_holdout(all, a.holdout);
  if (split.train.size() < static_cast<std::size_t>(cfg.therm_bits) + 1)
    throw DataError("need at least K+1 training samples to fit thresholds");
  prepare_outputs(a.out, {"thresholds.json"}, a.force);
  dwn::Checkpoint ck;
  ck.model = dwn::init_model(cfg);
  const auto fit = dwn::fit_model_thresholds(ck.model, split.train);
  ck.optimizer = dwn::make_adam_state(ck.model);
  dwn::save_checkpoint(fs::path(a.out) / "thresholds.json", ck);

  // Fraction of (sample, feature) pairs with bit k set; ideally 1 - (k+1)/(K+1).
  const int F = cfg.num_features(), K = cfg.therm_bits;
  std::vector<std::vector<double>> per_feature(F, std::vector<double>(K, 0.0));
  for (const auto& s : split.train) {
    const auto bits = dwn::encode_hard(dwn::preprocess(s.image, cfg), ck.model.thresholds);
    for (int j = 0; j < F; ++j)
      for (int k = 0; k < K; ++k) per_feature[j][k] += bits[static_cast<std::size_t>(j) * K + k];
  }
  std::vector<double> overall(K, 0.0);
  for (auto& row : per_feature)
    for (int k = 0; k < K; ++k) {
      row[k] /= static_cast<double>(split.train.size());
      overall[k] += row[k] / F;
    }
  ordered_json levels = ordered_json::array();
  for (int k = 0; k < K; ++k)
    levels.push_back({{"k", k}, {"activation", overall[k]}, {"expected", 1.0 - (k + 1.0) / (K + 1.0)}});
  ordered_json out{{"seed", cfg.seed},
                   {"samples", split.train.size()},
                   {"holdout", a.holdout},
                   {"features", F},
                   {"therm_bits", K},
                   {"degenerate_features", fit.degenerate_features},
                   {"activation", levels},
                   {"per_feature", per_feature},
                   {"checkpoint", (fs::path(a.out) / "thresholds.json").string()}};
  std::cout << out.dump() << '\n';
  for (const auto& l : levels)
    note("bit " + std::to_string(l["k"].get<int>()) + ": activation " + fixed(l["activation"].get<double>(), 3) +
         " (expected " + fixed(l["expected"].get<double>(), 3) + ")");
  return 0;
}

struct TrainArgs {
  std::string data, out, model_config, holdout, init, resume;
  int epochs = -1;
  int stop_after = -1;
  double lr = -1;
  bool resize = false, force = false;
};

int cmd_train(const TrainArgs& a, std::optional<std::uint64_t> seed) {
  dwn::Checkpoint ck;
  bool resumed = false;
  if (!a.resume.empty()) {
    ck = dwn::load_checkpoint(a.resume);
    resumed = true;
  } else if (!a.init.empty()) {
    ck = dwn::load_checkpoint(a.init);
    ck.next_epoch = 0;
    ck.best_metric = -1;
  } else {
    auto cfg = load_model_config(a.model_config);
    if (seed) cfg.seed = *seed;
    cfg.validate();
    ck.model = dwn::init_model(cfg);
  }
  auto& m = ck.model;
  if (a.epochs >= 0) m.config.epochs = a.epochs;
  if (a.lr > 0) m.config.learning_rate = a.lr;
  m.config.validate();

  const auto all = load_gaze_dataset(a.data, m.config.input_size, a.resize);
  const auto split = split_holdout(all, a.holdout);
  if (split.train.empty()) throw DataError("training split is empty");
  if (!a.holdout.empty() && split.holdout.empty()) throw DataError("no samples for holdout subject " + a.holdout);
  if (!m.thresholds.fitted) {
    dwn::fit_model_thresholds(m, split.train);
    note("thresholds fitted on " + std::to_string(split.train.size()) + " training samples");
  }
  if (!resumed) ck.optimizer = dwn::make_adam_state(m);

  const fs::path out(a.out);
  prepare_outputs(out, resumed ? std::vector<std::string>{} : std::vector<std::string>{"best.json", "last.json", "train_log.jsonl"},
                  a.force || resumed);
  std::ofstream log(out / "train_log.jsonl", resumed ? std::ios::app : std::ios::trunc);
  const auto data = dwn::prepare_training_data(m, split.train);
  const auto& val = split.holdout.empty() ? split.train : split.holdout;
  const auto init_eval = dwn::evaluate(m, val);
  if (ck.next_epoch == 0) note("initial error " + fixed(init_eval.mean_deg, 2) + " deg");

  ordered_json history = ordered_json::array();
  for (int e = ck.next_epoch; e < m.config.epochs; ++e) {
    if (a.stop_after >= 0 && e >= a.stop_after) break;
    const auto st = dwn::run_epoch(m, data, ck.optimizer, e);
    const auto tr = dwn::evaluate(m, split.train);
    const auto va = dwn::evaluate(m, val);
    ck.next_epoch = e + 1;
    // The last binarized epochs are the ones that match the 1-bit export, so
    // only they compete for "best" when binarization is on.
    const bool eligible = m.config.binarize_epochs == 0 || dwn::binarize_phase(m.config, e);
    if (eligible && (ck.best_metric < 0 || va.mean_deg < ck.best_metric)) {
      ck.best_metric = va.mean_deg;
      dwn::save_checkpoint(out / "best.json", ck);
    }
    dwn::save_checkpoint(out / "last.json", ck);
    ordered_json row{{"epoch", e},
                     {"loss", st.mean_loss},
                     {"temperature", st.temperature},
                     {"skipped", st.skipped},
                     {"train_deg", tr.mean_deg},
                     {"val_deg", va.mean_deg},
                     {"seed", m.config.seed}};
    log << row.dump() << '\n';
    log.flush();
    history.push_back(row);
    note("epoch " + std::to_string(e) + " loss " + fixed(st.mean_loss, 5) + " train " + fixed(tr.mean_deg, 2) +
         " deg, val " + fixed(va.mean_deg, 2) + " deg");
  }
  const auto final_eval = dwn::evaluate(m, val);
  std::cout << ordered_json{{"seed", m.config.seed},
                            {"holdout", a.holdout},
                            {"train_samples", split.train.size()},
                            {"val_samples", val.size()},
                            {"initial", eval_json(init_eval)},
                            {"final", eval_json(final_eval)},
                            {"best_val_deg", ck.best_metric < 0 ? ordered_json(nullptr) : ordered_json(ck.best_metric)},
                            {"next_epoch", ck.next_epoch},
                            {"epochs", history}}
                   .dump()
            << '\n';
  return 0;
}

struct EvalArgs {
  std::string model, data, subject, csv;
  bool resize = false, force = false;
};

int cmd_eval(const EvalArgs& a, std::optional<std::uint64_t>) {
  const bool quantized_file = fs::path(a.model).extension() == ".dwn";
  std::optional<dwn::GazeModel> fmodel;
  std::optional<io::QuantizedModel> qmodel;
  if (quantized_file) {
    qmodel = io::import_quantized(io::read_file_bytes(a.model));
  } else {
    fmodel = dwn::load_checkpoint(a.model).model;
    if (!fmodel->thresholds.fitted) throw DataError(a.model + ": thresholds are not fitted");
    qmodel = io::quantize(*fmodel);
  }
  const io::QuantizedInterpreter interp(*qmodel);
  const auto cfg = interp.config();
  auto samples = load_gaze_dataset(a.data, cfg.input_size, a.resize);
  if (!a.subject.empty()) samples = split_holdout(samples, a.subject).holdout;

  std::map<std::string, std::vector<double>> float_err, quant_err;
  std::vector<double> fall, qall, diff;
  std::size_t fdeg = 0, qdeg = 0;
  for (const auto& s : samples) {
    const auto target = dwn::normalize_target(s.target);
    const auto q = interp.forward(s.image);
    qdeg += q.degenerate;
    const double qe = dwn::angular_error_deg(q.gaze, target);
    quant_err[s.subject].push_back(qe);
    qall.push_back(qe);
    if (fmodel) {
      const auto f = dwn::predict(*fmodel, s.image);
      fdeg += f.degenerate;
      const double fe = dwn::angular_error_deg(f.gaze, target);
      float_err[s.subject].push_back(fe);
      fall.push_back(fe);
      diff.push_back(dwn::angular_error_deg(f.gaze, q.gaze));
    }
  }
  ordered_json out{{"model", a.model}, {"data", a.data}, {"seed", cfg.seed}, {"samples", samples.size()}};
  std::string csv = "model,subject,count,mean_deg,median_deg\n";
  auto csv_row = [&](const std::string& kind, const std::string& subj, const dwn::EvalStats& s) {
    csv += kind + "," + subj + "," + std::to_string(s.count) + "," + (s.count ? fixed(s.mean_deg, 6) : "n/a") + "," +
           (s.count ? fixed(s.median_deg, 6) : "n/a") + "\n";
  };
  auto block = [&](const std::string& kind, const std::vector<double>& all_err,
                   const std::map<std::string, std::vector<double>>& per, std::size_t degenerate) {
    const auto s = dwn::summarize_errors(all_err, degenerate);
    ordered_json b = eval_json(s);
    ordered_json subj = ordered_json::object();
    csv_row(kind, "all", s);
    for (const auto& [k, v] : per) {
      const auto ss = dwn::summarize_errors(v);
      subj[k] = eval_json(ss);
      csv_row(kind, k, ss);
    }
    b["per_subject"] = subj;
    return b;
  };
  if (fmodel) out["float"] = block("float", fall, float_err, fdeg);
  out["quantized"] = block("quantized", qall, quant_err, qdeg);
  if (fmodel) {
    ordered_json d;
    if (diff.empty()) {
      d = {{"mean_deg", nullptr}, {"frac_under_3deg", nullptr}};
    } else {
      const auto s = dwn::summarize_errors(diff);
      std::size_t under = 0;
      for (double x : diff) under += x < 3.0;
      const double frac = static_cast<double>(under) / static_cast<double>(diff.size());
      d = {{"mean_deg", s.mean_deg}, {"median_deg", s.median_deg}, {"frac_under_3deg", frac}};
      csv += "degradation,all," + std::to_string(diff.size()) + "," + fixed(s.mean_deg, 6) + "," + fixed(s.median_deg, 6) +
             "\n";
    }
    out["degradation"] = d;
  }
  if (!a.csv.empty()) {
    prepare_file(a.csv, a.force);
    write_text(a.csv, csv);
  }
  std::cout << out.dump() << '\n';
  if (samples.empty()) note("evaluation set is empty: metrics are n/a");
  return 0;
}

struct ExportArgs {
  std::string model, out;
  bool force = false;
};

int cmd_export(const ExportArgs& a) {
  const auto ck = dwn::load_checkpoint(a.model);
  if (!ck.model.thresholds.fitted) throw DataError(a.model + ": thresholds are not fitted");
  const auto bytes = io::export_quantized(ck.model);
  prepare_file(a.out, a.force);
  io::write_file_bytes(a.out, bytes);
  const auto c = dwn::count_complexity(ck.model.config);
  std::cout << ordered_json{{"out", a.out},
                            {"file_bytes", bytes.size()},
                            {"payload_bytes", io::payload_size(ck.model.config)},
                            {"params", c.params},
                            {"seed", ck.model.config.seed}}
                   .dump()
            << '\n';
  note("payload " + std::to_string(io::payload_size(ck.model.config)) + " bytes, file " + std::to_string(bytes.size()) +
       " bytes");
  return 0;
}

int cmd_inspect(const std::string& path) {
  const auto bytes = io::read_file_bytes(path);
  const auto q = io::import_quantized(bytes);
  const auto& h = q.header;
  const auto cfg = io::config_of(q);
  const auto c = dwn::count_complexity(cfg);
  std::cout << ordered_json{{"file", path},
                            {"file_bytes", bytes.size()},
                            {"magic", "DWN1"},
                            {"version", h.version},
                            {"quantile_rule", h.quantile_rule == io::kQuantileLinear ? "linear" : "unknown"},
                            {"input_size", h.input_size},
                            {"pool_k", h.pool_k},
                            {"therm_bits", h.therm_bits},
                            {"num_luts", h.num_luts},
                            {"addr_bits", h.addr_bits},
                            {"seed", h.seed},
                            {"payload_bytes", h.payload_bytes},
                            {"header_bytes", bytes.size() - h.payload_bytes},
                            {"params", c.params},
                            {"macs", c.macs},
                            {"lookups", c.lookups}}
                   .dump()
            << '\n';
  return 0;
}

struct SimArgs {
  std::string config, out;
  int frames = -1;
  bool force = false, plot = false;
};

sim::SimConfig resolve_sim_config(const SimArgs& a, std::optional<std::uint64_t> seed) {
  auto c = sim::load_sim_config(a.config);
  if (seed) {
    c.seed = *seed;
    c.detector.oracle.seed = *seed;
    c.stabilization.synthetic.seed = *seed;
  }
  if (a.frames > 0) c.frames = a.frames;
  return c;
}

int cmd_simulate(const SimArgs& a, std::optional<std::uint64_t> seed) {
  const auto c = resolve_sim_config(a, seed);
  const fs::path out(a.out);
  prepare_outputs(out, {"report.json", "trace.jsonl", "table.csv"}, a.force);
  const auto rep = sim::simulate(c);
  const auto report = sim::report_json(rep, c);
  write_text(out / "report.json", report.dump(2) + "\n");
  write_text(out / "trace.jsonl", sim::trace_jsonl(rep));
  std::string csv = "stratum,gt,hits,acc\n";
  for (int s = 0; s < 3; ++s)
    csv += std::string(det::kStratumNames[s]) + "," + std::to_string(rep.strata[s].gt) + "," +
           std::to_string(rep.strata[s].hits) + "," + sim::fmt_acc(rep.strata[s].acc()) + "\n";
  csv += "all," + std::to_string(rep.overall.gt) + "," + std::to_string(rep.overall.hits) + "," +
         sim::fmt_acc(rep.overall.acc()) + "\n";
  write_text(out / "table.csv", csv);
  std::cout << ordered_json{{"seed", c.seed},
                            {"frames", rep.frames},
                            {"accuracy", report["accuracy"]},
                            {"refresh_count", rep.policy.refresh_count},
                            {"mean_mosaic_area", rep.policy.mean_mosaic_area},
                            {"comm_reduction", sim::opt_json(rep.cost.comm_reduction)},
                            {"failures", rep.failures},
                            {"out", a.out}}
                   .dump()
            << '\n';
  note("simulated " + std::to_string(rep.frames) + " frames, " + std::to_string(rep.policy.refresh_count) +
       " detector runs, comm reduction " + (rep.cost.comm_reduction ? fixed(*rep.cost.comm_reduction, 1) + "x" : "n/a"));
  return rep.failures > 0 ? 0 : 0;
}

int cmd_sweep(const SimArgs& a, std::optional<std::uint64_t> seed) {
  const auto c = resolve_sim_config(a, seed);
  const fs::path out(a.out);
  std::vector<std::string> files{"table.csv", "sweep.json"};
  if (a.plot)
    for (const char* s : det::kStratumNames) files.push_back(std::string("acc_") + s + ".svg");
  prepare_outputs(out, files, a.force);
  const auto tab = sim::sweep(c);
  write_text(out / "table.csv", sim::sweep_csv(tab));
  write_text(out / "sweep.json", sim::sweep_json(tab, c).dump(2) + "\n");
  if (a.plot)
    for (int s = 0; s < 3; ++s)
      write_text(out / (std::string("acc_") + det::kStratumNames[s] + ".svg"), svg::accuracy_chart(tab, s));
  std::cout << ordered_json{{"seed", c.seed},
                            {"cells", tab.sides.size() * tab.counts.size()},
                            {"failures", tab.failures},
                            {"out", a.out}}
                   .dump()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glance: weightless gaze estimation and gaze-driven ROI pipeline simulation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed_flag;
  bool quiet = false;
  app.add_option("--seed", seed_flag, "seed (default: $GLANCE_SEED, else the config's seed)");
  app.add_flag("-q,--quiet", quiet, "no progress output on stderr");

  GenArgs gen;
  auto* g = app.add_subcommand("gen-gaze-data", "write the synthetic eye-crop fixture (PGM + index.csv)");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--per-cluster", gen.per_cluster, "samples per gaze cluster");
  g->add_option("--subjects", gen.subjects, "number of synthetic subjects");
  g->add_option("--size", gen.size, "crop side in pixels");
  g->add_option("--noise", gen.noise, "pixel noise std-dev in [-1,1] units");
  g->add_flag("--force", gen.force, "overwrite existing outputs");

  FitArgs fit;
  auto* f = app.add_subcommand("fit-thresholds", "fit quantile thresholds and write a starting checkpoint");
  f->add_option("--data", fit.data, "dataset directory with index.csv")->required();
  f->add_option("--out", fit.out, "output directory")->required();
  f->add_option("--model-config", fit.model_config, "JSON with estimator hyperparameters");
  f->add_option("--holdout", fit.holdout, "subject excluded from the fit");
  f->add_flag("--resize", fit.resize, "resample crops to the model input size");
  f->add_flag("--force", fit.force, "overwrite existing outputs");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the estimator");
  t->add_option("--data", tr.data, "dataset directory with index.csv")->required();
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_option("--model-config", tr.model_config, "JSON with estimator hyperparameters");
  t->add_option("--holdout", tr.holdout, "leave-one-person-out subject");
  t->add_option("--init", tr.init, "checkpoint from fit-thresholds");
  t->add_option("--resume", tr.resume, "continue from a checkpoint (e.g. last.json)");
  t->add_option("--epochs", tr.epochs, "total epochs");
  t->add_option("--stop-after", tr.stop_after, "stop before this epoch index (for staged runs)");
  t->add_option("--lr", tr.lr, "learning rate");
  t->add_flag("--resize", tr.resize, "resample crops to the model input size");
  t->add_flag("--force", tr.force, "overwrite existing outputs");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval-gaze", "angular error of a checkpoint or .dwn model");
  e->add_option("--model", ev.model, "checkpoint (.json) or quantized model (.dwn)")->required();
  e->add_option("--data", ev.data, "dataset directory with index.csv")->required();
  e->add_option("--subject", ev.subject, "evaluate one subject only");
  e->add_option("--csv", ev.csv, "also write metrics as CSV");
  e->add_flag("--resize", ev.resize, "resample crops to the model input size");
  e->add_flag("--force", ev.force, "overwrite existing outputs");

  ExportArgs ex;
  auto* x = app.add_subcommand("export", "write the quantized .dwn file");
  x->add_option("--model", ex.model, "checkpoint (.json)")->required();
  x->add_option("--out", ex.out, "output .dwn path")->required();
  x->add_flag("--force", ex.force, "overwrite existing outputs");

  std::string inspect_path;
  auto* i = app.add_subcommand("inspect", "print a .dwn header");
  i->add_option("file", inspect_path, ".dwn file")->required();

  SimArgs sa;
  auto* s = app.add_subcommand("simulate", "run the ROI pipeline over a frame sequence");
  s->add_option("--config", sa.config, "simulator config (JSON)")->required();
  s->add_option("--out", sa.out, "output directory")->required();
  s->add_option("--frames", sa.frames, "override the frame count");
  s->add_flag("--force", sa.force, "overwrite existing outputs");

  SimArgs sw;
  auto* w = app.add_subcommand("sweep", "accuracy grid over ROI side and count");
  w->add_option("--config", sw.config, "simulator config (JSON)")->required();
  w->add_option("--out", sw.out, "output directory")->required();
  w->add_option("--frames", sw.frames, "override the frame count");
  w->add_flag("--plot", sw.plot, "write one SVG chart per size stratum");
  w->add_flag("--force", sw.force, "overwrite existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 2;
  }
  verbosity = quiet ? 0 : 1;

  try {
    std::optional<std::uint64_t> seed = seed_flag ? seed_flag : env_seed();
    if (*g) return cmd_gen(gen, seed);
    if (*f) return cmd_fit(fit, seed);
    if (*t) return cmd_train(tr, seed);
    if (*e) return cmd_eval(ev, seed);
    if (*x) return cmd_export(ex);
    if (*i) return cmd_inspect(inspect_path);
    if (*s) return cmd_simulate(sa, seed);
    if (*w) return cmd_sweep(sw, seed);
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return ex.exit_code() == 1 ? 3 : ex.exit_code();
  } catch (const std::filesystem::filesystem_error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 3;
  }
  return 0;
}
