#include "regtrack/cli.hpp"

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "regtrack/analysis.hpp"
#include "regtrack/backends.hpp"
#include "regtrack/embedding.hpp"
#include "regtrack/metrics.hpp"
#include "regtrack/motio.hpp"
#include "regtrack/motion.hpp"
#include "regtrack/oracles.hpp"
#include "regtrack/synth.hpp"
#include "regtrack/tracker.hpp"

namespace regtrack::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string key_of(const std::string& flag) {
  std::string k = flag.substr(flag.find_first_not_of('-'));
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

// Options that may also come from a JSON config file. A value given on the
// command line wins over the file, which wins over the built-in default.
class Settings {
 public:
  template <typename T>
  CLI::Option* option(CLI::App* app, const std::string& flag, T& var, const std::string& help) {
    auto* opt = app->add_option(flag, var, help)->capture_default_str();
    add(flag, opt, var);
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& flag, bool& var, const std::string& help) {
    auto* opt = app->add_flag(flag, var, help);
    add(flag, opt, var);
    return opt;
  }

  void apply(const json& cfg) {
    if (!cfg.is_object()) {
      throw UsageError("config file must hold a JSON object");
    }
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
      const auto s = std::find_if(entries_.begin(), entries_.end(),
                                  [&](const Entry& e) { return e.key == it.key(); });
      if (s == entries_.end()) {
        throw UsageError("unknown config key '" + it.key() + "'");
      }
      if (s->opt->count() == 0) {
        s->load(it.value());
      }
    }
  }

  json effective() const {
    json j = json::object();
    for (const auto& e : entries_) {
      j[e.key] = e.dump();
    }
    return j;
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> load;
    std::function<json()> dump;
  };

  template <typename T>
  void add(const std::string& flag, CLI::Option* opt, T& var) {
    const std::string key = key_of(flag);
    entries_.push_back({key, opt,
                        [&var, key](const json& v) {
                          try {
                            var = v.get<T>();
                          } catch (const json::exception& e) {
                            throw UsageError("config key '" + key + "': " + e.what());
                          }
                        },
                        [&var] { return json(var); }});
  }

  std::vector<Entry> entries_;
};

struct TrackArgs {
  std::vector<std::string> seqs;
  std::vector<std::string> dets;
  std::string gt;
  std::string out;
  std::string config;
  bool record_time{false};

  std::string backend{"gt"};
  std::string backend_cmd;
  std::string backend_log;
  int backend_timeout{10000};
  std::string mode{"public"};
  double sigma_active{0.5};
  double lambda_active{0.6};
  double lambda_new{0.3};
  std::string cmc{"off"};
  bool cva{false};
  bool reid{false};
  int f_reid{10};
  double reid_dist{2.0};
  double reid_iou{0.3};
  std::string oracle{"none"};
  int decimate{1};
  int jobs{1};
  std::uint64_t seed{0};
  double noise{0.0};
  double noise_scale{0.0};
  double noise_flip{0.0};
  double miss_vis{0.0};
};

void add_track_options(CLI::App* app, TrackArgs& a, Settings& s, bool need_out) {
  app->add_option("--seq", a.seqs, "Sequence directory (repeatable)")->required();
  app->add_option("--dets", a.dets,
                  "Public detection file; one per --seq, or one path relative to each sequence");
  app->add_option("--gt", a.gt, "Ground-truth file replacing <seq>/gt/gt.txt (single --seq)");
  auto* out = app->add_option("--out", a.out, "Output directory for results and manifests");
  if (need_out) {
    out->required();
  }
  app->add_option("--config", a.config, "JSON file of option values (flags take precedence)");
  app->add_flag("--record-time", a.record_time, "Write start/finish timestamps into manifests");

  s.option(app, "--backend", a.backend, "Regressor/classifier: gt | file | external")
      ->check(CLI::IsMember({"gt", "file", "external"}));
  s.option(app, "--backend-cmd", a.backend_cmd,
           "file: regression log (or directory of <seq>.reglog); external: shell command");
  s.option(app, "--backend-log", a.backend_log,
           "Directory receiving a replayable <seq>.reglog of every backend exchange");
  s.option(app, "--backend-timeout", a.backend_timeout, "External backend reply timeout (ms)");
  s.option(app, "--mode", a.mode, "Detection mode: private | public")
      ->check(CLI::IsMember({"private", "public"}));
  s.option(app, "--sigma-active", a.sigma_active, "Kill tracks scoring below this");
  s.option(app, "--lambda-active", a.lambda_active, "NMS IoU threshold between active tracks");
  s.option(app, "--lambda-new", a.lambda_new, "IoU threshold for starting new tracks");
  s.option(app, "--cmc", a.cmc, "Camera motion compensation: off | euclidean | affine")
      ->check(CLI::IsMember({"off", "euclidean", "affine"}));
  s.flag(app, "--cva", a.cva, "Constant velocity motion model");
  s.flag(app, "--reid", a.reid, "Short-term reID with the ground-truth identity embedder");
  s.option(app, "--f-reid", a.f_reid, "Frames an inactive track stays in the reID gallery");
  s.option(app, "--reid-dist", a.reid_dist, "Maximum embedding distance for reID");
  s.option(app, "--reid-iou", a.reid_iou, "Minimum IoU between gallery box and candidate");
  s.option(app, "--oracle", a.oracle, "Oracle components: kill,reg,mm,reid,inter,all or none");
  s.option(app, "--decimate", a.decimate, "Keep every K-th frame")->check(CLI::PositiveNumber);
  s.option(app, "--jobs", a.jobs, "Sequences processed in parallel")->check(CLI::PositiveNumber);
  s.option(app, "--seed", a.seed, "Seed of the gt backend noise");
  s.option(app, "--noise", a.noise, "gt backend: center noise sigma (px)");
  s.option(app, "--noise-scale", a.noise_scale, "gt backend: relative size noise sigma");
  s.option(app, "--noise-flip", a.noise_flip, "gt backend: probability a score drops to 0");
  s.option(app, "--miss-vis", a.miss_vis, "gt backend: objects less visible than this score 0");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot open config file " + path);
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<fs::path> resolve_dets(const TrackArgs& a) {
  std::vector<fs::path> out;
  if (a.dets.empty()) {
    return out;
  }
  if (a.dets.size() == a.seqs.size() && a.seqs.size() > 1) {
    out.assign(a.dets.begin(), a.dets.end());
    return out;
  }
  if (a.dets.size() != 1) {
    throw UsageError("give one --dets per --seq, or a single --dets");
  }
  for (const auto& s : a.seqs) {
    const fs::path d(a.dets.front());
    const bool as_given = d.is_absolute() || (a.seqs.size() == 1 && fs::exists(d));
    out.push_back(as_given ? d : fs::path(s) / d);
  }
  return out;
}

SequenceData load_input(const fs::path& dir, const std::optional<fs::path>& dets) {
  if (!fs::exists(dir / "seqinfo.ini")) {
    throw UsageError("not a sequence directory (no seqinfo.ini): " + dir.string());
  }
  if (dets && !fs::exists(*dets)) {
    throw UsageError("detection file not found: " + dets->string());
  }
  return load_sequence(dir, dets);
}

std::vector<GtEntry> read_gt_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("ground truth not found: " + path);
  }
  try {
    return parse_ground_truth(in);
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

// Loads sequence i of a track-style command, before decimation.
SequenceData load_track_input(const TrackArgs& a, std::size_t i,
                              const std::vector<fs::path>& dets) {
  std::optional<fs::path> det;
  if (a.mode == "public" && !dets.empty()) {
    det = dets[i];
  }
  SequenceData seq = load_input(a.seqs[i], det);
  if (!a.gt.empty()) {
    seq.gt = read_gt_file(a.gt);
    seq.has_gt = true;
  }
  return seq;
}

TrackerConfig tracker_config(const TrackArgs& a, const SequenceInfo& info) {
  TrackerConfig cfg;
  cfg.sigma_active = a.sigma_active;
  cfg.lambda_active = a.lambda_active;
  cfg.lambda_new = a.lambda_new;
  cfg.f_reid = a.f_reid;
  cfg.reid_distance_threshold = a.reid_dist;
  cfg.reid_iou_gate = a.reid_iou;
  cfg.enable_cmc = a.cmc != "off";
  cfg.enable_cva = a.cva;
  cfg.enable_reid = a.reid;
  cfg.mode = parse_detection_mode(a.mode);
  cfg.frame_width = info.width;
  cfg.frame_height = info.height;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

NoiseModel noise_model(const TrackArgs& a) {
  NoiseModel n{a.noise, a.noise_scale, a.noise_flip, a.miss_vis, a.seed};
  try {
    n.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return n;
}

OracleConfig oracle_config(const TrackArgs& a) {
  try {
    return OracleConfig::parse(a.oracle);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void check_track_args(const TrackArgs& a) {
  if (a.mode == "public" && a.dets.empty()) {
    throw UsageError("--mode public requires --dets");
  }
  if (a.backend != "gt" && a.backend_cmd.empty()) {
    throw UsageError("--backend " + a.backend + " requires --backend-cmd");
  }
  if (a.backend_timeout < 1) {
    throw UsageError("--backend-timeout must be positive");
  }
  if (!a.gt.empty() && a.seqs.size() != 1) {
    throw UsageError("--gt applies to a single --seq");
  }
  resolve_dets(a);
  oracle_config(a);
}

struct SequenceRun {
  SequenceData seq;
  std::vector<Track> tracks;
  std::vector<std::string> warnings;
  std::string backend_id;
  std::string embedder_id;
  std::string camera_id;
  std::string detections_file;
};

// Runs the tracker on one (already decimated) sequence.
SequenceRun track_sequence(const TrackArgs& a, SequenceData seq) {
  const TrackerConfig cfg = tracker_config(a, seq.info);
  const OracleConfig oracle = oracle_config(a);
  SequenceRun run;
  const std::string name = seq.info.name;

  std::unique_ptr<RegressorClassifier> inner;
  if (a.backend == "gt") {
    if (!seq.has_gt) {
      throw UsageError("--backend gt needs ground truth in " + seq.root.string());
    }
    const auto considered = filter_considered(seq.gt);
    inner = std::make_unique<GtOracleBackend>(considered, noise_model(a));
  } else if (a.backend == "file") {
    fs::path log = a.backend_cmd;
    if (fs::is_directory(log)) {
      log /= name + ".reglog";
    }
    std::ifstream in(log);
    if (!in) {
      throw UsageError("cannot open regression log " + log.string());
    }
    inner = std::make_unique<FileBackend>(in, log.filename().string());
  } else {
    inner = std::make_unique<ExternalBackend>(shell_command(a.backend_cmd),
                                              std::chrono::milliseconds(a.backend_timeout));
  }
  std::ofstream log_out;
  std::unique_ptr<RecordingBackend> recorder;
  RegressorClassifier* backend = inner.get();
  if (!a.backend_log.empty()) {
    fs::create_directories(a.backend_log);
    const fs::path p = fs::path(a.backend_log) / (name + ".reglog");
    log_out.open(p);
    if (!log_out) {
      throw std::runtime_error("cannot write " + p.string());
    }
    recorder = std::make_unique<RecordingBackend>(*inner, log_out);
    backend = recorder.get();
  }
  run.backend_id = backend->identity();

  std::unique_ptr<GtIdentityEmbedder> embedder;
  if (cfg.enable_reid) {
    if (!seq.has_gt) {
      throw UsageError("--reid uses the ground-truth identity embedder; " + seq.root.string() +
                       " has no ground truth");
    }
    embedder = std::make_unique<GtIdentityEmbedder>(filter_considered(seq.gt), a.seed);
    run.embedder_id = embedder->identity();
  }

  std::unique_ptr<EccCameraMotion> camera;
  RunOptions options;
  options.oracle = oracle;
  if (cfg.enable_cmc) {
    EccConfig ecc;
    ecc.mode = a.cmc == "affine" ? TransformKind::affine : TransformKind::euclidean;
    const SequenceData* sp = &seq;
    camera = std::make_unique<EccCameraMotion>(
        EccCameraMotion::file_loader([sp](FrameIndex f) { return sp->image_path(f); }), ecc);
    options.camera = camera.get();
    run.camera_id = camera->identity();
  }
  auto result = run_tracker(seq, cfg, *backend, embedder.get(), options);
  run.tracks = std::move(result.tracks);
  run.warnings = std::move(result.warnings);
  run.seq = std::move(seq);
  return run;
}

json manifest(const TrackArgs& a, const json& settings, const std::vector<std::string>& argv,
              const SequenceRun& run, const std::string& results_file) {
  json m;
  m["tool"] = "regtrack";
  m["version"] = kVersion;
  m["command_line"] = argv;
  m["sequence"] = run.seq.info.name;
  m["sequence_dir"] = run.seq.root.string();
  m["frames"] = run.seq.info.length;
  m["config"] = settings;
  m["backend"] = run.backend_id;
  m["embedder"] = run.embedder_id.empty() ? json(nullptr) : json(run.embedder_id);
  m["camera_motion"] = run.camera_id.empty() ? json(nullptr) : json(run.camera_id);
  m["seed"] = a.seed;
  m["gt_file"] = a.gt.empty() ? json(nullptr) : json(a.gt);
  m["detections_file"] = run.detections_file;
  m["results"] = results_file;
  m["tracks"] = run.tracks.size();
  m["warnings"] = run.warnings;
  return m;
}

// Runs `work(i)` for i in [0, n) on up to `jobs` threads. Returns the first
// exception per index.
std::vector<std::exception_ptr> parallel_for(std::size_t n, int jobs,
                                             const std::function<void(std::size_t)>& work) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max(jobs, 1), n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& t : pool) {
    t.join();
  }
  return errors;
}

// Reports per-index errors; returns the exit code they imply.
int report_errors(const std::vector<std::exception_ptr>& errors,
                  const std::vector<std::string>& labels, std::ostream& err) {
  int code = kExitOk;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) {
      continue;
    }
    try {
      std::rethrow_exception(errors[i]);
    } catch (const UsageError& e) {
      err << "error: " << labels[i] << ": " << e.what() << '\n';
      code = std::max(code, kExitUsage);
    } catch (const std::exception& e) {
      err << "error: " << labels[i] << ": " << e.what() << '\n';
      code = std::max(code, kExitFailure);
    }
  }
  return code;
}

std::vector<ResultEntry> read_results_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("result file not found: " + path.string());
  }
  try {
    return parse_results(in);
  } catch (const ParseError& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

struct TrackOutcome {
  std::string name;
  std::optional<MetricsReport> report;
};

// Shared by `track` and `oracle`.
int run_tracking(const TrackArgs& a, const json& settings, const std::vector<std::string>& argv,
                 bool evaluate_runs, std::ostream& out, std::ostream& err) {
  check_track_args(a);
  const auto dets = resolve_dets(a);
  std::vector<TrackOutcome> outcomes(a.seqs.size());
  std::vector<std::vector<std::string>> warnings(a.seqs.size());
  auto errors = parallel_for(a.seqs.size(), a.jobs, [&](std::size_t i) {
    const std::string started = a.record_time ? utc_now() : "";
    SequenceData seq = decimate(load_track_input(a, i, dets), a.decimate);
    SequenceRun run = track_sequence(a, std::move(seq));
    if (a.mode == "public") {
      run.detections_file = dets[i].string();
    }
    const std::string name = run.seq.info.name;
    const fs::path results = fs::path(a.out) / (name + ".txt");
    std::ostringstream rs;
    write_results(std::span<const Track>(run.tracks), rs);
    write_text_file(results, rs.str());
    json m = manifest(a, settings, argv, run, results.string());
    if (a.record_time) {
      m["started"] = started;
      m["finished"] = utc_now();
    }
    write_text_file(fs::path(a.out) / (name + ".manifest.json"), m.dump(2) + "\n");
    outcomes[i].name = name;
    warnings[i] = run.warnings;
    if (evaluate_runs) {
      if (!run.seq.has_gt) {
        throw UsageError("evaluation needs ground truth for " + name);
      }
      EvalOptions eo;
      eo.num_frames = run.seq.info.length;
      outcomes[i].report = evaluate(run.seq.gt, read_results_file(results), eo);
    }
  });
  for (std::size_t i = 0; i < warnings.size(); ++i) {
    for (const auto& w : warnings[i]) {
      err << "warning: " << a.seqs[i] << ": " << w << '\n';
    }
  }
  const int code = report_errors(errors, a.seqs, err);
  if (code != kExitOk) {
    return code;
  }
  if (evaluate_runs) {
    std::vector<NamedReport> rows;
    for (const auto& o : outcomes) {
      rows.emplace_back(o.name, *o.report);
    }
    write_metrics_table(rows, out);
    std::ostringstream csv;
    write_metrics_csv(rows, csv);
    write_text_file(fs::path(a.out) / "metrics.csv", csv.str());
  } else {
    for (const auto& o : outcomes) {
      out << o.name << ": " << (fs::path(a.out) / (o.name + ".txt")).string() << '\n';
    }
  }
  return kExitOk;
}

struct EvalArgs {
  std::vector<std::string> seqs;
  std::string gt;
  std::vector<std::string> results;
  std::string csv;
  int decimate{1};
  double iou{0.5};
};

// (name, gt, num_frames, results path) per evaluated sequence.
struct EvalInput {
  std::string name;
  std::vector<GtEntry> gt;
  FrameIndex frames{0};
  fs::path results;
  SequenceData seq;
};

std::vector<EvalInput> eval_inputs(const std::vector<std::string>& seqs, const std::string& gt_file,
                                   const std::vector<std::string>& results, int k) {
  std::vector<EvalInput> inputs;
  if (!gt_file.empty()) {
    if (!seqs.empty() || results.size() != 1) {
      throw UsageError("--gt takes exactly one --results file and no --seq");
    }
    EvalInput e;
    e.name = fs::path(gt_file).parent_path().parent_path().filename().string();
    if (e.name.empty()) {
      e.name = fs::path(gt_file).stem().string();
    }
    e.gt = read_gt_file(gt_file);
    for (const auto& g : e.gt) {
      e.frames = std::max(e.frames, g.frame);
    }
    e.results = results.front();
    inputs.push_back(std::move(e));
    return inputs;
  }
  if (seqs.empty()) {
    throw UsageError("give --seq directories or --gt");
  }
  if (results.size() != 1 && results.size() != seqs.size()) {
    throw UsageError("give one --results directory, or one result file per --seq");
  }
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    SequenceData seq = decimate(load_input(seqs[i], std::nullopt), k);
    if (!seq.has_gt) {
      throw UsageError("no ground truth in " + seqs[i]);
    }
    EvalInput e;
    e.name = seq.info.name;
    e.gt = seq.gt;
    e.frames = seq.info.length;
    const fs::path r = results.size() == 1 ? fs::path(results.front()) : fs::path(results[i]);
    e.results = fs::is_directory(r) ? r / (e.name + ".txt") : r;
    e.seq = std::move(seq);
    inputs.push_back(std::move(e));
  }
  return inputs;
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
  const auto inputs = eval_inputs(a.seqs, a.gt, a.results, a.decimate);
  std::vector<NamedReport> rows;
  for (const auto& in : inputs) {
    const auto results = read_results_file(in.results);
    EvalOptions eo;
    eo.iou_threshold = a.iou;
    eo.num_frames = in.frames;
    rows.emplace_back(in.name, evaluate(in.gt, results, eo));
  }
  write_metrics_table(rows, out);
  if (!a.csv.empty()) {
    std::ostringstream csv;
    write_metrics_csv(rows, csv);
    write_text_file(a.csv, csv.str());
  }
  return kExitOk;
}

struct AnalyzeArgs {
  std::string kind{"visibility"};
  std::vector<std::string> results;
  int bins{10};
  double min_vis{kDefaultHeightMinVisibility};
  std::string ks{"1,2,3,6,10"};
};

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
    } catch (const std::exception&) {
      throw UsageError("not an integer list: " + s);
    }
  }
  return out;
}

int cmd_analyze(const AnalyzeArgs& an, const TrackArgs& a, const json& settings,
                std::ostream& out) {
  if (a.out.empty()) {
    throw UsageError("analyze requires --out");
  }
  const fs::path out_dir = a.out;
  if (an.kind == "framerate") {
    check_track_args(a);
    const auto ks = parse_int_list(an.ks);
    const auto dets = resolve_dets(a);
    for (std::size_t i = 0; i < a.seqs.size(); ++i) {
      const SequenceData seq = load_track_input(a, i, dets);
      if (!seq.has_gt) {
        throw UsageError("frame-rate study needs ground truth in " + a.seqs[i]);
      }
      std::vector<FrameRateRow> rows;
      try {
        rows = frame_rate_study(seq, ks, [&](const SequenceData& d) {
          const SequenceRun run = track_sequence(a, d);
          EvalOptions eo;
          eo.num_frames = d.info.length;
          return evaluate(d.gt, results_from_tracks(run.tracks), eo);
        });
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      std::ostringstream csv;
      csv << "# sequence: " << seq.info.name << "\n# frame_rate: "
          << format_shortest(seq.info.frame_rate) << '\n';
      write_frame_rate_csv(rows, csv);
      const fs::path p = out_dir / (seq.info.name + ".framerate.csv");
      write_text_file(p, csv.str());
      out << p.string() << '\n';
    }
    (void)settings;
    return kExitOk;
  }

  if (an.kind != "visibility" && an.kind != "height" && an.kind != "gaps") {
    throw UsageError("unknown --kind " + an.kind);
  }
  if (an.results.empty()) {
    throw UsageError("analyze --kind " + an.kind + " requires --results");
  }
  auto inputs = eval_inputs(a.seqs, "", an.results, a.decimate);
  const auto dets = resolve_dets(a);
  BinnedRatio total;
  GapReport all_gaps;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& in = inputs[i];
    const auto results = read_results_file(in.results);
    EvalOptions eo;
    eo.num_frames = in.frames;
    std::ostringstream csv;
    if (an.kind == "gaps") {
      DetectionsByFrame detections = in.seq.detections;
      if (!dets.empty()) {
        const SequenceData with = decimate(load_input(a.seqs[i], dets[i]), a.decimate);
        detections = with.detections;
      } else if (!in.seq.has_detections) {
        throw UsageError("gap analysis needs detections for " + in.name);
      }
      const GapReport r = gap_analysis(in.gt, detections, results, eo);
      write_gap_csv(r, csv);
      all_gaps.gaps.insert(all_gaps.gaps.end(), r.gaps.begin(), r.gaps.end());
      for (const auto& [len, c] : r.coverage_by_length) {
        all_gaps.coverage_by_length[len].first += c.first;
        all_gaps.coverage_by_length[len].second += c.second;
      }
    } else {
      const EvalDetail detail = evaluate_detailed(in.gt, results, eo);
      BinnedRatio b;
      std::vector<std::pair<std::string, std::string>> header{{"kind", an.kind},
                                                              {"sequence", in.name}};
      if (an.kind == "visibility") {
        b = visibility_analysis(detail, uniform_edges(an.bins));
      } else {
        b = height_analysis(detail, default_height_edges(), an.min_vis);
        header.emplace_back("min_visibility", format_shortest(an.min_vis));
      }
      write_binned_csv(b, header, csv);
      if (i == 0) {
        total = make_bins(b.bin_edges);
      }
      for (std::size_t k = 0; k < b.bins(); ++k) {
        total.total[k] += b.total[k];
        total.tracked[k] += b.tracked[k];
      }
    }
    const fs::path p = out_dir / (in.name + "." + an.kind + ".csv");
    write_text_file(p, csv.str());
    out << p.string() << '\n';
  }
  if (inputs.size() > 1) {
    std::ostringstream csv;
    if (an.kind == "gaps") {
      write_gap_csv(all_gaps, csv);
    } else {
      std::vector<std::pair<std::string, std::string>> header{{"kind", an.kind},
                                                              {"sequence", "ALL"}};
      write_binned_csv(total, header, csv);
    }
    const fs::path p = out_dir / ("ALL." + an.kind + ".csv");
    write_text_file(p, csv.str());
    out << p.string() << '\n';
  }
  return kExitOk;
}

struct SynthArgs {
  std::string out;
  std::string name{"SYNTH"};
  int count{1};
  std::uint64_t seed{0};
  int tracks{5};
  int frames{50};
  int width{640};
  int height{480};
  double speed_min{0.5};
  double speed_max{3.0};
  double size_min{60.0};
  double size_max{140.0};
  std::vector<std::string> occlusions;
  int occlusion_ramp{8};
  std::vector<double> pan;
  double rotate{0.0};
  bool render{false};
  bool staggered{false};
  double max_pair_iou{-1.0};
  double noise{0.0};
  double noise_scale{0.0};
  double noise_flip{0.0};
  double miss_vis{0.0};
};

OcclusionEvent parse_occlusion(const std::string& s) {
  const auto v = parse_int_list(s);
  if (v.size() != 4) {
    throw UsageError("--occlusion expects a,b,start,length: " + s);
  }
  return {v[0], v[1], v[2], v[3]};
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  for (int i = 0; i < a.count; ++i) {
    SynthConfig cfg;
    cfg.n_tracks = a.tracks;
    cfg.n_frames = a.frames;
    cfg.frame_w = a.width;
    cfg.frame_h = a.height;
    cfg.speed_min = a.speed_min;
    cfg.speed_max = a.speed_max;
    cfg.size_min = a.size_min;
    cfg.size_max = a.size_max;
    cfg.occlusion_ramp = a.occlusion_ramp;
    cfg.rng_seed = a.seed + static_cast<std::uint64_t>(i);
    cfg.render_images = a.render;
    cfg.staggered_lifetimes = a.staggered;
    if (a.max_pair_iou >= 0.0) {
      cfg.max_pair_iou = a.max_pair_iou;
    }
    for (const auto& o : a.occlusions) {
      cfg.occlusion_events.push_back(parse_occlusion(o));
    }
    if (!a.pan.empty() || a.rotate != 0.0) {
      if (!a.pan.empty() && a.pan.size() != 2) {
        throw UsageError("--pan expects dx,dy");
      }
      const double dx = a.pan.empty() ? 0.0 : a.pan[0];
      const double dy = a.pan.empty() ? 0.0 : a.pan[1];
      const Point2 c{0.5 * a.width, 0.5 * a.height};
      const Transform2D step = Transform2D::rotation(a.rotate * std::numbers::pi / 180.0, c)
                                   .then(Transform2D::translation(dx, dy));
      cfg.camera_path.assign(static_cast<std::size_t>(a.frames), step);
      cfg.camera_path[0] = Transform2D::identity();
    }
    cfg.name = a.count == 1 ? a.name : a.name + "-" + (i + 1 < 10 ? "0" : "") + std::to_string(i + 1);
    SynthSequence seq;
    try {
      seq = generate(cfg);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    NoiseModel noise{a.noise, a.noise_scale, a.noise_flip, a.miss_vis, cfg.rng_seed};
    try {
      noise.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const fs::path dir = fs::path(a.out) / cfg.name;
    write_sequence(dir, seq, derive_detections(seq.gt, noise));
    out << dir.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tracking by bounding-box regression: track, evaluate, analyze, oracle, synth"};
  app.set_version_flag("--version", std::string("regtrack ") + kVersion);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  TrackArgs track_args;
  Settings track_settings;
  auto* track = app.add_subcommand("track", "Run the tracker and write MOTChallenge result files");
  add_track_options(track, track_args, track_settings, true);

  TrackArgs oracle_args;
  Settings oracle_settings;
  auto* oracle = app.add_subcommand(
      "oracle", "Run the tracker with ground-truth oracle components and report metrics");
  add_track_options(oracle, oracle_args, oracle_settings, true);

  EvalArgs eval_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "CLEAR MOT and IDF1 metrics");
  evaluate_cmd->add_option("--seq", eval_args.seqs, "Sequence directory with gt/gt.txt");
  evaluate_cmd->add_option("--gt", eval_args.gt, "Ground-truth file (instead of --seq)");
  evaluate_cmd->add_option("--results", eval_args.results,
                           "Result directory holding <seq>.txt, or result files")
      ->required();
  evaluate_cmd->add_option("--csv", eval_args.csv, "Also write the report as CSV");
  evaluate_cmd->add_option("--decimate", eval_args.decimate, "Evaluate against every K-th frame")
      ->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--iou", eval_args.iou, "IoU needed for a match");

  AnalyzeArgs an_args;
  TrackArgs an_track;
  Settings an_settings;
  auto* analyze = app.add_subcommand("analyze", "Failure-mode analyses as plot-ready CSV");
  analyze->add_option("--kind", an_args.kind, "visibility | height | gaps | framerate")
      ->check(CLI::IsMember({"visibility", "height", "gaps", "framerate"}));
  analyze->add_option("--results", an_args.results, "Result directory or files");
  analyze->add_option("--bins", an_args.bins, "Visibility bins over [0,1]")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--min-vis", an_args.min_vis, "Height analysis visibility floor");
  analyze->add_option("--ks", an_args.ks, "Frame-rate study decimation factors");
  add_track_options(analyze, an_track, an_settings, true);

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Generate synthetic MOTChallenge-style sequences");
  synth->add_option("--out", syn.out, "Output directory")->required();
  synth->add_option("--name", syn.name, "Sequence name (suffixed -01.. when --count > 1)");
  synth->add_option("--count", syn.count, "Number of sequences")->check(CLI::PositiveNumber);
  synth->add_option("--seed", syn.seed, "Seed; sequence i uses seed + i");
  synth->add_option("--tracks", syn.tracks, "Objects per sequence");
  synth->add_option("--frames", syn.frames, "Frames per sequence");
  synth->add_option("--width", syn.width, "Frame width");
  synth->add_option("--height", syn.height, "Frame height");
  synth->add_option("--speed-min", syn.speed_min, "Minimum speed (px/frame)");
  synth->add_option("--speed-max", syn.speed_max, "Maximum speed (px/frame)");
  synth->add_option("--size-min", syn.size_min, "Minimum box height (px)");
  synth->add_option("--size-max", syn.size_max, "Maximum box height (px)");
  synth->add_option("--occlusion", syn.occlusions, "a,b,start,length (repeatable)");
  synth->add_option("--occlusion-ramp", syn.occlusion_ramp, "Frames to approach and leave");
  synth->add_option("--pan", syn.pan, "Camera translation per frame: dx,dy")->delimiter(',');
  synth->add_option("--rotate", syn.rotate, "Camera rotation per frame (degrees)");
  synth->add_flag("--render", syn.render, "Write textured PGM frames");
  synth->add_flag("--staggered", syn.staggered, "Random track lifetimes");
  synth->add_option("--max-pair-iou", syn.max_pair_iou,
                    "Resample until no two objects overlap above this IoU (<0: off)");
  synth->add_option("--noise", syn.noise, "Detection center noise sigma (px)");
  synth->add_option("--noise-scale", syn.noise_scale, "Detection relative size noise sigma");
  synth->add_option("--noise-flip", syn.noise_flip, "Detection score flip probability");
  synth->add_option("--miss-vis", syn.miss_vis, "Drop detections less visible than this");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    auto effective = [](const TrackArgs& a, Settings& s) {
      if (!a.config.empty()) {
        s.apply(read_json_file(a.config));
      }
      return s.effective();
    };
    if (track->parsed()) {
      const json settings = effective(track_args, track_settings);
      return run_tracking(track_args, settings, args, false, out, err);
    }
    if (oracle->parsed()) {
      const json settings = effective(oracle_args, oracle_settings);
      if (!OracleConfig::parse(oracle_args.oracle).any()) {
        throw UsageError("oracle requires --oracle");
      }
      return run_tracking(oracle_args, settings, args, true, out, err);
    }
    if (evaluate_cmd->parsed()) {
      return cmd_evaluate(eval_args, out);
    }
    if (analyze->parsed()) {
      const json settings = effective(an_track, an_settings);
      return cmd_analyze(an_args, an_track, settings, out);
    }
    if (synth->parsed()) {
      return cmd_synth(syn, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace regtrack::cli
