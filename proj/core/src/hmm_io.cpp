#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "hmmse/error.hpp"
#include "hmmse/hmm.hpp"

namespace hmmse {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'H', 'M', 'S', 'E', 'M', 'D', 'L', '\0'};

json vector_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector json_vector(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json transform_json(const AffineTransform& t) {
  std::vector<double> a;
  for (Eigen::Index r = 0; r < t.A.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.A.cols(); ++c) a.push_back(t.A(r, c));
  }
  return json{{"dim", t.A.rows()}, {"A", a}, {"b", vector_json(t.b)}};
}

AffineTransform json_transform(const json& j) {
  const auto dim = j.at("dim").get<Eigen::Index>();
  const auto a = j.at("A").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(a.size()) != dim * dim) {
    throw Error(ErrorCode::CorruptHeader, "transform matrix has the wrong size");
  }
  AffineTransform t;
  t.A.resize(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) t.A(r, c) = a[static_cast<std::size_t>(r * dim + c)];
  }
  t.b = json_vector(j.at("b"));
  return t;
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f32(std::vector<unsigned char>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::CorruptHeader, "model file is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

void put_state(std::vector<unsigned char>& out, const HmmState& s) {
  for (Eigen::Index i = 0; i < s.spectral.mean.size(); ++i) put_f32(out, s.spectral.mean(i));
  for (Eigen::Index i = 0; i < s.spectral.variance.size(); ++i) put_f32(out, s.spectral.variance(i));
  for (Eigen::Index i = 0; i < kPitchWidth; ++i) put_f32(out, s.pitch.mean(i));
  for (Eigen::Index i = 0; i < kPitchWidth; ++i) put_f32(out, s.pitch.variance(i));
  put_f32(out, s.pitch.voiced_weight);
  put_f32(out, s.duration_mean);
  put_f32(out, s.duration_variance);
}

HmmState get_state(Reader& in, Eigen::Index dim) {
  HmmState s;
  s.spectral.mean.resize(dim);
  s.spectral.variance.resize(dim);
  s.pitch.mean.resize(kPitchWidth);
  s.pitch.variance.resize(kPitchWidth);
  for (Eigen::Index i = 0; i < dim; ++i) s.spectral.mean(i) = in.f32();
  for (Eigen::Index i = 0; i < dim; ++i) s.spectral.variance(i) = in.f32();
  for (Eigen::Index i = 0; i < kPitchWidth; ++i) s.pitch.mean(i) = in.f32();
  for (Eigen::Index i = 0; i < kPitchWidth; ++i) s.pitch.variance(i) = in.f32();
  s.pitch.voiced_weight = in.f32();
  s.duration_mean = in.f32();
  s.duration_variance = in.f32();
  return s;
}

json model_list(const std::map<std::string, PhoneHmm>& models) {
  json list = json::array();
  for (const auto& [key, hmm] : models) {
    list.push_back({{"key", key}, {"phoneme", hmm.phoneme}, {"occupancy", hmm.occupancy}});
  }
  return list;
}

void check_dims(const PhoneHmm& hmm, Eigen::Index dim) {
  for (const auto& s : hmm.states) {
    if (s.spectral.mean.size() != dim || s.spectral.variance.size() != dim || s.pitch.mean.size() != kPitchWidth ||
        s.pitch.variance.size() != kPitchWidth) {
      throw Error(ErrorCode::DimensionMismatch, "model " + hmm.phoneme + " has inconsistent stream sizes");
    }
  }
}

}  // namespace

std::vector<unsigned char> serialize_model(const VoiceModel& model) {
  const auto& m = model.metadata;
  const Eigen::Index dim = model.spectral_dim();
  json meta;
  meta["kind"] = model.kind == ModelKind::adapted ? "adapted" : "average";
  meta["alpha"] = m.alpha;
  meta["order"] = m.order;
  meta["frame_shift"] = m.frame_shift;
  meta["sample_rate"] = m.sample_rate;
  meta["context_width"] = m.context_width == ContextWidth::quinphone ? "quinphone" : "triphone";
  meta["spectral_floor"] = vector_json(m.spectral_floor);
  meta["pitch_floor"] = vector_json(m.pitch_floor);
  meta["gv_target"] = vector_json(m.gv_target);
  if (m.spectral_transform) meta["spectral_transform"] = transform_json(*m.spectral_transform);
  if (m.pitch_transform) meta["pitch_transform"] = transform_json(*m.pitch_transform);
  meta["training_log"] = m.training_log;
  meta["models"] = model_list(model.models);
  meta["backoff"] = model_list(model.backoff);
  const std::string text = meta.dump();

  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kModelFileVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto* group : {&model.models, &model.backoff}) {
    for (const auto& [key, hmm] : *group) {
      check_dims(hmm, dim);
      for (const auto& s : hmm.states) put_state(out, s);
    }
  }
  return out;
}

VoiceModel deserialize_model(const std::vector<unsigned char>& bytes) {
  Reader in(bytes);
  if (in.text(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw Error(ErrorCode::CorruptHeader, "not a model file");
  }
  const std::uint32_t version = in.u32();
  if (version != kModelFileVersion) {
    throw Error(ErrorCode::UnsupportedFormat, "model file version " + std::to_string(version));
  }
  const std::uint64_t length = in.u64();
  if (length > bytes.size()) throw Error(ErrorCode::CorruptHeader, "metadata length exceeds file size");
  json meta;
  try {
    meta = json::parse(in.text(static_cast<std::size_t>(length)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptHeader, std::string("model metadata: ") + e.what());
  }

  VoiceModel model;
  try {
    auto& m = model.metadata;
    model.kind = meta.at("kind").get<std::string>() == "adapted" ? ModelKind::adapted : ModelKind::average;
    m.alpha = meta.at("alpha").get<double>();
    m.order = meta.at("order").get<int>();
    m.frame_shift = meta.at("frame_shift").get<int>();
    m.sample_rate = meta.at("sample_rate").get<int>();
    m.context_width =
        meta.at("context_width").get<std::string>() == "quinphone" ? ContextWidth::quinphone : ContextWidth::triphone;
    m.spectral_floor = json_vector(meta.at("spectral_floor"));
    m.pitch_floor = json_vector(meta.at("pitch_floor"));
    m.gv_target = json_vector(meta.at("gv_target"));
    if (meta.contains("spectral_transform")) m.spectral_transform = json_transform(meta["spectral_transform"]);
    if (meta.contains("pitch_transform")) m.pitch_transform = json_transform(meta["pitch_transform"]);
    m.training_log = meta.at("training_log").get<std::vector<std::string>>();
    if (m.order < 0) throw Error(ErrorCode::CorruptHeader, "negative model order");

    const Eigen::Index dim = model.spectral_dim();
    auto read_group = [&](const json& list, std::map<std::string, PhoneHmm>& dst) {
      for (const auto& entry : list) {
        PhoneHmm hmm;
        hmm.phoneme = entry.at("phoneme").get<std::string>();
        hmm.occupancy = entry.at("occupancy").get<double>();
        dst.emplace(entry.at("key").get<std::string>(), std::move(hmm));
      }
    };
    read_group(meta.at("models"), model.models);
    read_group(meta.at("backoff"), model.backoff);
    // Blocks follow the metadata lists, which are stored in key order.
    for (auto* group : {&model.models, &model.backoff}) {
      for (auto& [key, hmm] : *group) {
        for (auto& s : hmm.states) s = get_state(in, dim);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptHeader, std::string("model metadata: ") + e.what());
  }
  if (!in.done()) throw Error(ErrorCode::CorruptHeader, "trailing bytes after model parameters");
  return model;
}

void write_model(const VoiceModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

VoiceModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open model " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace hmmse
