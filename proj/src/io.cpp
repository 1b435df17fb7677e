#include "satweight/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "satweight/errors.hpp"

namespace satweight {

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

using nlohmann::json;

namespace {

std::array<unsigned char, 32> sha256_raw(std::string_view bytes) {
  std::array<unsigned char, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
    throw Error(ErrorCategory::io, "SHA-256 computation failed");
  }
  return digest;
}

std::string to_hex(std::span<const unsigned char> bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCategory::corrupt_file, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::corrupt_file, std::string("bad field '") + key + "': " + e.what());
  }
}

json state_json(const NavState& s) {
  return {{"x", s.position.x}, {"y", s.position.y}, {"z", s.position.z}, {"clock_bias", s.clock_bias}};
}

NavState state_from(const json& j) {
  return {{field<double>(j, "x"), field<double>(j, "y"), field<double>(j, "z")}, field<double>(j, "clock_bias")};
}

}  // namespace

std::string sha256_hex(std::string_view bytes) { return to_hex(sha256_raw(bytes)); }

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

json to_json(const GenConfig& c) {
  return {{"epochs", c.epochs},
          {"n_satellites", {{"min", c.n_satellites.min}, {"max", c.n_satellites.max}}},
          {"biased_fraction", c.biased_fraction},
          {"mixture", {{"alpha", c.mixture.alpha}, {"mu", c.mixture.mu}, {"sigma", c.mixture.sigma}, {"lambda", c.mixture.lambda}}},
          {"seed", c.seed},
          {"orbit_radius_m", c.orbit_radius},
          {"min_elevation_rad", c.min_elevation},
          {"gamma_m", c.gamma},
          {"clip_m", c.clip},
          {"split", {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test}}},
          {"split_seed", c.split_seed}};
}

GenConfig gen_config_from_json(const json& j) {
  GenConfig c;
  c.epochs = field<std::size_t>(j, "epochs");
  const json& n = j.at("n_satellites");
  c.n_satellites = {field<std::size_t>(n, "min"), field<std::size_t>(n, "max")};
  c.biased_fraction = field<double>(j, "biased_fraction");
  const json& m = j.at("mixture");
  c.mixture = {field<double>(m, "alpha"), field<double>(m, "mu"), field<double>(m, "sigma"), field<double>(m, "lambda")};
  c.seed = field<std::uint64_t>(j, "seed");
  c.orbit_radius = field<double>(j, "orbit_radius_m");
  c.min_elevation = field<double>(j, "min_elevation_rad");
  c.gamma = field<double>(j, "gamma_m");
  c.clip = field<double>(j, "clip_m");
  const json& s = j.at("split");
  c.split = {field<double>(s, "train"), field<double>(s, "validation"), field<double>(s, "test")};
  c.split_seed = field<std::uint64_t>(j, "split_seed");
  return c;
}

json to_json(const LabeledEpoch& r) {
  json channels = json::array();
  for (const auto& ch : r.epoch.channels) {
    json c = {{"sat_id", ch.sat_id},
              {"x", ch.position.x},
              {"y", ch.position.y},
              {"z", ch.position.z},
              {"pseudo_range", ch.pseudo_range},
              {"elevation", ch.elevation},
              {"cn0", ch.cn0},
              {"acceleration", ch.acceleration}};
    if (ch.truth) {
      c["truth_error"] = ch.truth->error;
      c["truth_biased"] = ch.truth->biased;
    }
    channels.push_back(std::move(c));
  }
  const auto& m = r.residual_matrix;
  std::vector<double> values(m.values.data(), m.values.data() + m.values.size());
  json matrix = {{"n", m.n()}, {"gamma", m.gamma}, {"values", std::move(values)}};
  if (m.clip) matrix["clip"] = *m.clip;
  return {{"record", "epoch"},
          {"epoch_id", r.epoch_id},
          {"split_tag", std::string(to_string(r.split))},
          {"truth_state", r.epoch.truth_state ? state_json(*r.epoch.truth_state) : json(nullptr)},
          {"channels", std::move(channels)},
          {"residual_matrix", std::move(matrix)},
          {"labels", r.labels.values}};
}

LabeledEpoch labeled_epoch_from_json(const json& j) {
  LabeledEpoch r;
  r.epoch_id = field<std::uint64_t>(j, "epoch_id");
  r.split = split_tag_from_string(field<std::string>(j, "split_tag"));
  if (j.contains("truth_state") && !j.at("truth_state").is_null()) r.epoch.truth_state = state_from(j.at("truth_state"));
  for (const json& c : j.at("channels")) {
    SatelliteChannel ch;
    ch.sat_id = field<std::uint32_t>(c, "sat_id");
    ch.position = {field<double>(c, "x"), field<double>(c, "y"), field<double>(c, "z")};
    ch.pseudo_range = field<double>(c, "pseudo_range");
    ch.elevation = field<double>(c, "elevation");
    ch.cn0 = field<double>(c, "cn0");
    ch.acceleration = field<double>(c, "acceleration");
    if (c.contains("truth_error")) ch.truth = ChannelTruth{field<double>(c, "truth_error"), field<bool>(c, "truth_biased")};
    r.epoch.channels.push_back(ch);
  }
  const json& m = j.at("residual_matrix");
  const auto n = field<std::size_t>(m, "n");
  const auto values = field<std::vector<double>>(m, "values");
  if (values.size() != n * n) throw Error(ErrorCategory::corrupt_file, "residual matrix size mismatch");
  r.residual_matrix.values = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  r.residual_matrix.gamma = field<double>(m, "gamma");
  if (m.contains("clip")) r.residual_matrix.clip = field<double>(m, "clip");
  r.labels = WeightVector(field<std::vector<double>>(j, "labels"));
  if (r.labels.size() != r.epoch.size() || n != r.epoch.size()) {
    throw Error(ErrorCategory::corrupt_file, "record " + std::to_string(r.epoch_id) + " has inconsistent sizes");
  }
  return r;
}

void write_dataset(const std::filesystem::path& path, const GenConfig& config, std::span<const LabeledEpoch> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  const json header = {{"record", "header"},
                       {"format", "satweight-dataset"},
                       {"version", kDatasetFormatVersion},
                       {"records", records.size()},
                       {"gen_config", to_json(config)}};
  out << header.dump() << '\n';
  for (const auto& r : records) {
    json rec = to_json(r);
    rec["normalization_clip"] = config.clip;
    out << rec.dump() << '\n';
  }
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCategory::corrupt_file, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (line_no == 1) {
        if (field<std::string>(j, "record") != "header" || field<std::string>(j, "format") != "satweight-dataset") {
          throw Error(ErrorCategory::corrupt_file, "missing dataset header");
        }
        if (field<int>(j, "version") != kDatasetFormatVersion) {
          throw Error(ErrorCategory::version_mismatch, "unsupported dataset version " + j.at("version").dump());
        }
        expected = field<std::size_t>(j, "records");
        ds.config = gen_config_from_json(j.at("gen_config"));
        ds.records.reserve(expected);
        continue;
      }
      ds.records.push_back(labeled_epoch_from_json(j));
    } catch (const Error& e) {
      throw Error(e.category(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorCategory::corrupt_file, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw Error(ErrorCategory::corrupt_file, path.string() + " is empty");
  if (ds.records.size() != expected) {
    throw Error(ErrorCategory::corrupt_file, path.string() + ": expected " + std::to_string(expected) + " records, found " +
                                                 std::to_string(ds.records.size()));
  }
  return ds;
}

std::vector<LabeledEpoch> select_split(const Dataset& dataset, SplitTag tag) {
  std::vector<LabeledEpoch> out;
  for (const auto& r : dataset.records) {
    if (r.split == tag) out.push_back(r);
  }
  return out;
}

namespace {

constexpr char kModelMagic[8] = {'S', 'A', 'T', 'W', 'L', 'S', 'T', 'M'};

template <typename T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw Error(ErrorCategory::corrupt_file, "model file is truncated");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t position() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const std::filesystem::path& path, const LstmModel& model) {
  model.validate();
  const auto& d = model.dims();
  std::string buf(kModelMagic, sizeof(kModelMagic));
  put<std::uint32_t>(buf, kModelFormatVersion);
  put<std::uint32_t>(buf, 0);
  put<std::uint64_t>(buf, d.input_size);
  put<std::uint64_t>(buf, d.hidden_size);
  put<std::uint64_t>(buf, d.layers);
  put<std::uint64_t>(buf, d.output_size);
  put<double>(buf, model.clip);
  put<double>(buf, model.gamma);
  put<double>(buf, model.sentinel_code);
  put<double>(buf, model.mask_code);
  put<std::uint64_t>(buf, model.log_labels ? 1 : 0);
  put<std::uint64_t>(buf, model.params.size());
  buf.append(reinterpret_cast<const char*>(model.params.data()), model.params.size() * sizeof(double));
  const auto digest = sha256_raw(buf);
  buf.append(reinterpret_cast<const char*>(digest.data()), digest.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

LstmModel load_model(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() < sizeof(kModelMagic) || std::memcmp(data.data(), kModelMagic, sizeof(kModelMagic)) != 0) {
    throw Error(ErrorCategory::corrupt_file, path.string() + " is not a model file");
  }
  Reader r(std::string_view(data).substr(sizeof(kModelMagic)));
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCategory::version_mismatch, "model format version " + std::to_string(version) + " is not supported");
  }
  r.get<std::uint32_t>();
  ModelDims dims;
  dims.input_size = r.get<std::uint64_t>();
  dims.hidden_size = r.get<std::uint64_t>();
  dims.layers = r.get<std::uint64_t>();
  dims.output_size = r.get<std::uint64_t>();
  const double clip = r.get<double>();
  const double gamma = r.get<double>();
  const double sentinel = r.get<double>();
  const double mask_code = r.get<double>();
  const bool log_labels = r.get<std::uint64_t>() != 0;
  const auto count = r.get<std::uint64_t>();
  if (dims.input_size == 0 || dims.hidden_size == 0 || dims.layers == 0 || dims.output_size == 0 ||
      dims.hidden_size > (1u << 20) || dims.layers > 64 || dims.input_size > (1u << 20) || dims.output_size > (1u << 20)) {
    throw Error(ErrorCategory::corrupt_file, "model file has invalid dimensions");
  }
  const std::size_t body = sizeof(kModelMagic) + r.position();
  if (count != ParamLayout::of(dims).total || data.size() != body + count * sizeof(double) + 32) {
    throw Error(ErrorCategory::corrupt_file, "model file is truncated or has a size mismatch");
  }
  const std::size_t payload = body + count * sizeof(double);
  const auto digest = sha256_raw(std::string_view(data).substr(0, payload));
  if (std::memcmp(digest.data(), data.data() + payload, digest.size()) != 0) {
    throw Error(ErrorCategory::corrupt_file, "model file checksum mismatch");
  }
  LstmModel model(dims);
  std::memcpy(model.params.data(), data.data() + body, count * sizeof(double));
  model.clip = clip;
  model.gamma = gamma;
  model.sentinel_code = sentinel;
  model.mask_code = mask_code;
  model.log_labels = log_labels;
  model.validate();
  return model;
}

}  // namespace satweight
