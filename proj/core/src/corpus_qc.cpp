#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "hmmse/enhance.hpp"
#include "hmmse/error.hpp"
#include "json.hpp"

namespace hmmse {
namespace {

namespace fs = std::filesystem;

// Full scale of 16-bit audio read back as doubles.
constexpr double kFullScale = 32767.0 / 32768.0;

std::map<std::string, fs::path> files_by_stem(const fs::path& dir, const std::string& extension) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "not a readable directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    if (it->path().extension() != extension) continue;
    out.emplace(it->path().stem().string(), it->path());
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + dir.string() + ": " + ec.message());
  return out;
}

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void check_audio(const Waveform& wf, const std::vector<PhoneLabel>* labels, const QcConfig& cfg, QcEntry& entry) {
  if (labels) {
    if (const auto labelled = labelled_duration(*labels)) {
      const double audio = wf.duration_seconds();
      const double deviation = audio > 0.0 ? std::abs(*labelled - audio) / audio : 1.0;
      if (deviation > cfg.duration_tolerance) {
        entry.findings.push_back({QcFinding::duration_mismatch, deviation,
                                  "labels cover " + std::to_string(*labelled) + " s of " + std::to_string(audio) + " s"});
      }
    }
  }
  if (wf.samples.empty()) {
    entry.findings.push_back({QcFinding::inaudible, -std::numeric_limits<double>::infinity(), "no samples"});
    return;
  }
  const auto clipped = static_cast<double>(
      std::count_if(wf.samples.begin(), wf.samples.end(), [](double x) { return std::abs(x) >= kFullScale; }));
  const double clip_fraction = clipped / static_cast<double>(wf.size());
  if (clip_fraction > cfg.clip_fraction) {
    entry.findings.push_back({QcFinding::clipping, clip_fraction, std::to_string(static_cast<long long>(clipped)) +
                                                                      " samples at full scale"});
  }
  const double level = rms(wf.samples);
  const double dbfs = level > 0.0 ? 20.0 * std::log10(level) : -std::numeric_limits<double>::infinity();
  if (dbfs < cfg.inaudible_dbfs) {
    entry.findings.push_back({QcFinding::inaudible, dbfs, "RMS level in dBFS"});
    return;  // an SNR estimate of near-silence says nothing
  }
  if (wf.size() >= static_cast<std::size_t>(cfg.frame.frame_length)) {
    const double snr = estimate_snr_db(wf, cfg.frame);
    if (snr < cfg.min_snr_db) entry.findings.push_back({QcFinding::low_snr, snr, "frame-energy SNR estimate in dB"});
  }
}

}  // namespace

std::string_view to_string(QcFinding finding) {
  switch (finding) {
    case QcFinding::missing_audio: return "missing_audio";
    case QcFinding::missing_label: return "missing_label";
    case QcFinding::empty_label: return "empty_label";
    case QcFinding::duration_mismatch: return "duration_mismatch";
    case QcFinding::clipping: return "clipping";
    case QcFinding::inaudible: return "inaudible";
    case QcFinding::low_snr: return "low_snr";
    case QcFinding::unreadable_audio: return "unreadable_audio";
    case QcFinding::malformed_label: return "malformed_label";
  }
  return "unknown";
}

bool QcEntry::has(QcFinding kind) const {
  return std::any_of(findings.begin(), findings.end(), [kind](const QcIssue& i) { return i.kind == kind; });
}

std::size_t QcReport::count(QcFinding kind) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [kind](const QcEntry& e) { return e.has(kind); }));
}

const QcEntry* QcReport::find(std::string_view stem) const {
  for (const auto& e : entries) {
    if (e.stem == stem) return &e;
  }
  return nullptr;
}

double estimate_snr_db(const Waveform& wf, const FrameConfig& frame) {
  FrameConfig rect = frame;
  rect.window = WindowKind::rectangular;
  const FrameMatrix frames = frame_signal(wf, rect);
  if (frames.rows() == 0) return 0.0;
  std::vector<double> energy_db(static_cast<std::size_t>(frames.rows()));
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    const double e = frames.row(t).squaredNorm() / static_cast<double>(frames.cols());
    energy_db[static_cast<std::size_t>(t)] = 10.0 * std::log10(std::max(e, 1e-10));
  }
  return percentile(energy_db, 0.9) - percentile(energy_db, 0.1);
}

QcReport validate_corpus(const fs::path& audio_dir, const fs::path& label_dir, const QcConfig& cfg,
                         const PhoneSet& phones) {
  const auto audio = files_by_stem(audio_dir, cfg.audio_extension);
  const auto labels = files_by_stem(label_dir, cfg.label_extension);
  std::set<std::string> stems;
  for (const auto& [stem, path] : audio) stems.insert(stem);
  for (const auto& [stem, path] : labels) stems.insert(stem);

  QcReport report;
  for (const auto& stem : stems) {
    QcEntry entry;
    entry.stem = stem;
    const auto a = audio.find(stem);
    const auto l = labels.find(stem);
    if (a == audio.end()) entry.findings.push_back({QcFinding::missing_audio, 0.0, "no audio file"});
    if (l == labels.end()) entry.findings.push_back({QcFinding::missing_label, 0.0, "no label file"});

    std::optional<std::vector<PhoneLabel>> parsed;
    if (l != labels.end()) {
      try {
        parsed = parse_label_file(l->second, phones);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::EmptyLabelFile) {
          entry.findings.push_back({QcFinding::empty_label, 0.0, "label file has no entries"});
        } else {
          entry.findings.push_back({QcFinding::malformed_label, 0.0, e.what()});
        }
      }
    }
    if (a != audio.end()) {
      try {
        const Waveform wf = read_wav(a->second);
        check_audio(wf, parsed ? &*parsed : nullptr, cfg, entry);
      } catch (const Error& e) {
        entry.findings.push_back({QcFinding::unreadable_audio, 0.0, e.what()});
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::string format_qc_report(const QcReport& report) {
  nlohmann::json files = nlohmann::json::array();
  std::size_t flagged = 0;
  for (const auto& entry : report.entries) {
    nlohmann::json findings = nlohmann::json::array();
    for (const auto& issue : entry.findings) {
      nlohmann::json f{{"kind", std::string(to_string(issue.kind))}, {"detail", issue.detail}};
      if (std::isfinite(issue.measurement)) f["measurement"] = issue.measurement;
      findings.push_back(std::move(f));
    }
    if (!entry.findings.empty()) ++flagged;
    files.push_back({{"stem", entry.stem}, {"findings", std::move(findings)}});
  }
  nlohmann::json doc{{"files", std::move(files)}, {"total", report.entries.size()}, {"flagged", flagged}};
  return doc.dump(2) + "\n";
}

}  // namespace hmmse
