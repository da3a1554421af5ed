#include "photoread/network_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

#include "photoread/error.hpp"

namespace photoread {
namespace {

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

constexpr char kMagic[4] = {'P', 'R', 'N', 'W'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T take() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> take_bytes(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    require(n <= bytes_.size() - pos_, ErrorKind::kData, "weight file is truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json layer_shape(const DenseLayer& l, bool bias) {
  return bias ? nlohmann::json::array({l.out}) : nlohmann::json::array({l.out, l.in});
}

nlohmann::json header_of(const NetworkWeights& w) {
  using nlohmann::json;
  json arch = {
      {"encoder_widths", w.arch.encoder_widths},
      {"head_widths", w.arch.head_widths},
      {"grid_size", w.arch.grid_size},
      {"activation", std::string(to_string(w.arch.activation))},
      {"count_scaled_readout", w.arch.count_scaled_readout},
      {"aux_dim", ArchitectureSpec::kAuxDim},
  };
  json standard = {
      {"s_scale", w.standard.s_scale},
      {"aux_mean", w.standard.aux_mean},
      {"aux_scale", w.standard.aux_scale},
      {"count_scale", w.standard.count_scale},
      {"aux_order", {"log_n", "log_alpha_g", "log_beta_g", "log_alpha_f", "log_beta_f"}},
  };
  json meta = {
      {"seed", w.meta.seed},
      {"epochs", w.meta.epochs},
      {"final_loss", w.meta.final_loss},
      {"validation_kl", w.meta.validation_kl},
      {"tasks", w.meta.tasks},
  };
  json tensors = json::array();
  const std::vector<std::string> names = w.tensor_names();
  std::size_t idx = 0;
  auto add_layer = [&](const DenseLayer& l) {
    tensors.push_back({{"name", names[idx++]}, {"shape", layer_shape(l, false)}});
    tensors.push_back({{"name", names[idx++]}, {"shape", layer_shape(l, true)}});
  };
  for (const DenseLayer& l : w.encoder) add_layer(l);
  for (const DenseLayer& l : w.head) add_layer(l);
  if (w.arch.count_scaled_readout) add_layer(w.readout);
  return {{"format", "photoread-network"},
          {"architecture", arch},
          {"standardization", standard},
          {"metadata", meta},
          {"tensors", tensors},
          {"dtype", "float64-le"},
          {"layout", "row-major"}};
}

template <typename T>
T field(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("weight header field '") + key + "': " + e.what());
  }
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> serialize_weights(const NetworkWeights& weights) {
  weights.validate();
  const std::string header = header_of(weights).dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kWeightFormatVersion);
  put<std::uint64_t>(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  for (std::span<const double> t : weights.tensors()) {
    for (double v : t) put<double>(out, v);
  }
  put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

NetworkWeights deserialize_weights(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 24, ErrorKind::kData, "weight file is truncated");
  require(std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::kData, "not a photoread weight file (bad magic)");
  const std::uint64_t stored = [&] {
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + bytes.size() - 8, 8);
    return v;
  }();

  Reader in(bytes.first(bytes.size() - 8));
  in.take_bytes(4);
  const auto version = in.take<std::uint32_t>();
  require(version == kWeightFormatVersion, ErrorKind::kData,
          "unsupported weight format version " + std::to_string(version));
  const auto header_bytes = in.take<std::uint64_t>();
  const auto raw_header = in.take_bytes(static_cast<std::size_t>(header_bytes));
  require(fnv1a64(bytes.first(bytes.size() - 8)) == stored, ErrorKind::kData,
          "weight file checksum mismatch (corrupt or truncated)");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw_header.begin(), raw_header.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("weight header is not valid JSON: ") + e.what());
  }

  NetworkWeights w;
  const auto& arch = header.at("architecture");
  w.arch.encoder_widths = field<std::vector<std::size_t>>(arch, "encoder_widths");
  w.arch.head_widths = field<std::vector<std::size_t>>(arch, "head_widths");
  w.arch.grid_size = field<std::size_t>(arch, "grid_size");
  w.arch.activation = activation_from_string(field<std::string>(arch, "activation"));
  w.arch.count_scaled_readout = field<bool>(arch, "count_scaled_readout");
  require(field<std::size_t>(arch, "aux_dim") == ArchitectureSpec::kAuxDim, ErrorKind::kData,
          "unsupported aux dimension");
  try {
    w.arch.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kData, std::string("weight header: ") + e.what());
  }

  const auto& st = header.at("standardization");
  w.standard.s_scale = field<double>(st, "s_scale");
  w.standard.aux_mean = field<std::array<double, 5>>(st, "aux_mean");
  w.standard.aux_scale = field<std::array<double, 5>>(st, "aux_scale");
  w.standard.count_scale = field<double>(st, "count_scale");

  const auto& meta = header.at("metadata");
  w.meta.seed = field<std::uint64_t>(meta, "seed");
  w.meta.epochs = field<int>(meta, "epochs");
  w.meta.final_loss = field<double>(meta, "final_loss");
  w.meta.validation_kl = field<double>(meta, "validation_kl");
  w.meta.tasks = field<std::uint64_t>(meta, "tasks");

  // Shapes follow from the architecture; the header's tensor list must agree with them.
  const NetworkWeights shaped = NetworkWeights::zeros_like(NetworkWeights::initialise(w.arch, 0));
  w.encoder = shaped.encoder;
  w.head = shaped.head;
  w.readout = shaped.readout;
  const auto& listed = header.at("tensors");
  const std::vector<std::string> names = w.tensor_names();
  std::vector<std::span<double>> tensors = w.tensors();
  require(listed.size() == tensors.size(), ErrorKind::kData, "weight header lists the wrong number of tensors");
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    require(field<std::string>(listed[t], "name") == names[t], ErrorKind::kData,
            "unexpected tensor '" + field<std::string>(listed[t], "name") + "'");
    std::size_t elements = 1;
    for (std::size_t d : field<std::vector<std::size_t>>(listed[t], "shape")) elements *= d;
    require(elements == tensors[t].size(), ErrorKind::kData, "tensor '" + names[t] + "' has the wrong shape");
    for (double& v : tensors[t]) v = in.take<double>();
  }
  require(in.position() == bytes.size() - 8, ErrorKind::kData, "weight file has trailing bytes");
  try {
    w.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kData, std::string("weight file: ") + e.what());
  }
  return w;
}

void save_weights(const NetworkWeights& weights, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_weights(weights);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::kData, "cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::kData, "failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

NetworkWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kData, "cannot open weight file '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

}  // namespace photoread
