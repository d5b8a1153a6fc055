#include "regtrack/motio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace regtrack {

std::optional<BoundingBox> Track::box_at(FrameIndex frame) const {
  auto it = std::lower_bound(boxes.begin(), boxes.end(), frame,
                             [](const TrackBox& b, FrameIndex f) { return b.frame < f; });
  if (it == boxes.end() || it->frame != frame) {
    return std::nullopt;
  }
  return it->box;
}

ParseError::ParseError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

void SequenceInfo::validate() const {
  if (!(frame_rate > 0.0)) {
    throw std::invalid_argument("sequence info: frameRate must be positive");
  }
  if (length < 1) {
    throw std::invalid_argument("sequence info: seqLength must be at least 1");
  }
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

std::string format_shortest(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) {
      break;
    }
    start = pos + 1;
  }
  return fields;
}

double parse_number(std::string_view field, const char* name) {
  double value = 0.0;
  if (!field.empty() && field.front() == '+') {
    field.remove_prefix(1);
  }
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw std::invalid_argument(std::string("non-numeric ") + name + " '" + std::string(field) +
                                "'");
  }
  return value;
}

int parse_integer(std::string_view field, const char* name) {
  const double v = parse_number(field, name);
  if (v != std::floor(v) || std::abs(v) > 2e9) {
    throw std::invalid_argument(std::string(name) + " must be an integer");
  }
  return static_cast<int>(v);
}

BoundingBox parse_box(const std::vector<std::string_view>& f, std::size_t first) {
  BoundingBox box{parse_number(f[first], "x"), parse_number(f[first + 1], "y"),
                  parse_number(f[first + 2], "w"), parse_number(f[first + 3], "h")};
  if (!box.valid()) {
    throw std::invalid_argument("box must have positive width and height");
  }
  return box;
}

FrameIndex parse_frame(std::string_view field) {
  const int frame = parse_integer(field, "frame");
  if (frame < 1) {
    throw std::invalid_argument("frame must be >= 1");
  }
  return frame;
}

// Calls `handle(fields)` for each non-blank line; exceptions from `handle`
// become LineErrors.
template <typename Handler>
std::vector<LineError> for_each_record(std::istream& in, Handler&& handle) {
  std::vector<LineError> errors;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    try {
      handle(lineno, split_fields(line));
    } catch (const std::invalid_argument& e) {
      errors.push_back({lineno, e.what()});
    }
  }
  return errors;
}

void throw_first(const std::vector<LineError>& errors) {
  if (!errors.empty()) {
    throw ParseError(errors.front().line, errors.front().message);
  }
}

}  // namespace

GtParseReport parse_ground_truth_report(std::istream& in) {
  GtParseReport report;
  report.errors = for_each_record(in, [&](std::size_t, const std::vector<std::string_view>& f) {
    if (f.size() != 9) {
      throw std::invalid_argument("expected 9 fields, got " + std::to_string(f.size()));
    }
    GtEntry e;
    e.frame = parse_frame(f[0]);
    e.track_id = parse_integer(f[1], "id");
    if (e.track_id < 1) {
      throw std::invalid_argument("track id must be positive");
    }
    e.box = parse_box(f, 2);
    e.conf = parse_integer(f[6], "conf");
    if (e.conf != 0 && e.conf != 1) {
      throw std::invalid_argument("conf must be 0 or 1");
    }
    e.class_id = parse_integer(f[7], "class");
    e.visibility = parse_number(f[8], "visibility");
    if (e.visibility < 0.0 || e.visibility > 1.0) {
      throw std::invalid_argument("visibility outside [0,1]");
    }
    report.entries.push_back(e);
  });
  return report;
}

std::vector<GtEntry> parse_ground_truth(std::istream& in) {
  auto report = parse_ground_truth_report(in);
  throw_first(report.errors);
  return std::move(report.entries);
}

DetectionParseReport parse_detections_report(std::istream& in) {
  DetectionParseReport report;
  report.errors =
      for_each_record(in, [&](std::size_t lineno, const std::vector<std::string_view>& f) {
        if (f.size() < 7 || f.size() > 10) {
          throw std::invalid_argument("expected 7 to 10 fields, got " + std::to_string(f.size()));
        }
        const FrameIndex frame = parse_frame(f[0]);
        Detection d;
        d.box = parse_box(f, 2);
        const double raw = parse_number(f[6], "score");
        d.score = std::clamp(raw, 0.0, 1.0);
        if (d.score != raw) {
          report.clamped.push_back({lineno, raw});
        }
        report.frames[frame].push_back(d);
        ++report.count;
      });
  return report;
}

DetectionsByFrame parse_detections(std::istream& in) {
  auto report = parse_detections_report(in);
  throw_first(report.errors);
  return std::move(report.frames);
}

ResultParseReport parse_results_report(std::istream& in) {
  ResultParseReport report;
  report.errors = for_each_record(in, [&](std::size_t, const std::vector<std::string_view>& f) {
    if (f.size() < 7 || f.size() > 10) {
      throw std::invalid_argument("expected 7 to 10 fields, got " + std::to_string(f.size()));
    }
    ResultEntry r;
    r.frame = parse_frame(f[0]);
    r.track_id = parse_integer(f[1], "id");
    if (r.track_id < 1) {
      throw std::invalid_argument("track id must be positive");
    }
    r.box = parse_box(f, 2);
    r.conf = parse_number(f[6], "conf");
    report.entries.push_back(r);
  });
  return report;
}

std::vector<ResultEntry> parse_results(std::istream& in) {
  auto report = parse_results_report(in);
  throw_first(report.errors);
  return std::move(report.entries);
}

void write_results(std::span<const ResultEntry> results, std::ostream& out) {
  std::vector<ResultEntry> sorted(results.begin(), results.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const ResultEntry& a, const ResultEntry& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
  });
  for (const auto& r : sorted) {
    out << r.frame << ',' << r.track_id << ',' << format_fixed(r.box.x, 2) << ','
        << format_fixed(r.box.y, 2) << ',' << format_fixed(r.box.w, 2) << ','
        << format_fixed(r.box.h, 2) << ',' << format_fixed(r.conf, 2) << ",-1,-1,-1\n";
  }
  if (!out) {
    throw std::runtime_error("write_results: output stream failure");
  }
}

std::vector<ResultEntry> results_from_tracks(std::span<const Track> tracks) {
  std::vector<ResultEntry> out;
  for (const auto& t : tracks) {
    for (const auto& b : t.boxes) {
      out.push_back({b.frame, t.id, b.box, b.score});
    }
  }
  return out;
}

void write_results(std::span<const Track> tracks, std::ostream& out) {
  const auto results = results_from_tracks(tracks);
  write_results(std::span<const ResultEntry>(results), out);
}

void write_ground_truth(std::span<const GtEntry> gt, std::ostream& out) {
  for (const auto& e : gt) {
    out << e.frame << ',' << e.track_id << ',' << format_shortest(e.box.x) << ','
        << format_shortest(e.box.y) << ',' << format_shortest(e.box.w) << ','
        << format_shortest(e.box.h) << ',' << e.conf << ',' << e.class_id << ','
        << format_shortest(e.visibility) << '\n';
  }
  if (!out) {
    throw std::runtime_error("write_ground_truth: output stream failure");
  }
}

void write_detections(const DetectionsByFrame& dets, std::ostream& out) {
  for (const auto& [frame, list] : dets) {
    for (const auto& d : list) {
      out << frame << ",-1," << format_shortest(d.box.x) << ',' << format_shortest(d.box.y) << ','
          << format_shortest(d.box.w) << ',' << format_shortest(d.box.h) << ','
          << format_shortest(d.score) << ",-1,-1,-1\n";
    }
  }
  if (!out) {
    throw std::runtime_error("write_detections: output stream failure");
  }
}

SequenceInfo parse_sequence_info(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '[' || t.front() == ';' || t.front() == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(lineno, "expected key=value");
    }
    kv[std::string(trim(t.substr(0, eq)))] = std::string(trim(t.substr(eq + 1)));
  }
  auto require = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw ParseError(0, std::string("seqinfo: missing key ") + key);
    }
    return it->second;
  };
  auto number = [&](const char* key) {
    try {
      return parse_number(require(key), key);
    } catch (const std::invalid_argument& e) {
      throw ParseError(0, std::string("seqinfo: ") + e.what());
    }
  };
  SequenceInfo info;
  info.name = require("name");
  info.frame_rate = number("frameRate");
  info.width = static_cast<int>(number("imWidth"));
  info.height = static_cast<int>(number("imHeight"));
  info.length = static_cast<int>(number("seqLength"));
  if (auto it = kv.find("imDir"); it != kv.end() && !it->second.empty()) {
    info.image_dir = it->second;
  }
  if (auto it = kv.find("imExt"); it != kv.end() && !it->second.empty()) {
    info.image_ext = it->second;
  }
  info.validate();
  return info;
}

void write_sequence_info(const SequenceInfo& info, std::ostream& out) {
  out << "[Sequence]\n"
      << "name=" << info.name << '\n';
  if (info.image_dir) {
    out << "imDir=" << *info.image_dir << '\n';
  }
  out << "frameRate=" << format_shortest(info.frame_rate) << '\n'
      << "seqLength=" << info.length << '\n'
      << "imWidth=" << info.width << '\n'
      << "imHeight=" << info.height << '\n'
      << "imExt=" << info.image_ext << '\n';
}

std::vector<GtEntry> filter_considered(std::span<const GtEntry> gt, const ConsiderationRule& rule) {
  std::vector<GtEntry> out;
  std::copy_if(gt.begin(), gt.end(), std::back_inserter(out),
               [&](const GtEntry& e) { return rule.considers(e); });
  return out;
}

GtByFrame group_by_frame(std::span<const GtEntry> gt) {
  GtByFrame out;
  for (const auto& e : gt) {
    out[e.frame].push_back(e);
  }
  return out;
}

std::optional<std::filesystem::path> SequenceData::image_path(FrameIndex frame) const {
  if (!info.image_dir) {
    return std::nullopt;
  }
  if (!source_frames.empty()) {
    if (frame < 1 || frame > static_cast<FrameIndex>(source_frames.size())) {
      return std::nullopt;
    }
    frame = source_frames[static_cast<std::size_t>(frame) - 1];
  }
  char name[32];
  std::snprintf(name, sizeof(name), "%06d", frame);
  return root / *info.image_dir / (std::string(name) + info.image_ext);
}

SequenceData load_sequence(const std::filesystem::path& dir,
                           const std::optional<std::filesystem::path>& detections_file) {
  namespace fs = std::filesystem;
  SequenceData seq;
  seq.root = dir;
  const fs::path ini = dir / "seqinfo.ini";
  std::ifstream info_in(ini);
  if (!info_in) {
    throw std::runtime_error("cannot open " + ini.string());
  }
  seq.info = parse_sequence_info(info_in);

  const fs::path gt_path = dir / "gt" / "gt.txt";
  if (std::ifstream gt_in(gt_path); gt_in) {
    try {
      seq.gt = parse_ground_truth(gt_in);
    } catch (const ParseError& e) {
      throw std::runtime_error(gt_path.string() + ": " + e.what());
    }
    seq.has_gt = true;
  }

  const fs::path det_path = detections_file.value_or(dir / "det" / "det.txt");
  if (std::ifstream det_in(det_path); det_in) {
    try {
      seq.detections = parse_detections(det_in);
    } catch (const ParseError& e) {
      throw std::runtime_error(det_path.string() + ": " + e.what());
    }
    seq.has_detections = true;
  } else if (detections_file) {
    throw std::runtime_error("cannot open " + det_path.string());
  }
  return seq;
}

}  // namespace regtrack
