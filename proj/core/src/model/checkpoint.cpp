#include "soda/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "soda/errors.hpp"

namespace soda::model {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'O', 'D', 'A', 'C', 'K', 'P', 'T'};

uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kInt32: return 3;
    case torch::kUInt8: return 4;
    case torch::kBool: return 5;
    default: throw CheckpointError("unsupported tensor dtype in checkpoint");
  }
}

torch::ScalarType dtype_from_code(uint8_t code) {
  switch (code) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kInt32;
    case 4: return torch::kUInt8;
    case 5: return torch::kBool;
    default: throw CheckpointError("unknown dtype code " + std::to_string(code));
  }
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}

std::string get_bytes(std::istream& in, uint64_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json meta;
  meta["config"] = ckpt.config;
  meta["extra"] = ckpt.extra;
  const std::string meta_str = meta.dump();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof kMagic);
    put<uint32_t>(out, ckpt.schema_version);
    put<uint64_t>(out, meta_str.size());
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
      auto t = tensor.detach().to(torch::kCPU).contiguous();
      put<uint32_t>(out, static_cast<uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<uint8_t>(out, dtype_code(t.scalar_type()));
      put<uint8_t>(out, static_cast<uint8_t>(t.dim()));
      for (auto d : t.sizes()) put<int64_t>(out, d);
      const uint64_t bytes = t.numel() * t.element_size();
      put<uint64_t>(out, bytes);
      out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
    }
    if (!out) throw CheckpointError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError(path.string() + " is not a soda checkpoint");

  Checkpoint ckpt;
  ckpt.schema_version = get<uint32_t>(in);
  if (ckpt.schema_version != kCheckpointSchemaVersion)
    throw CheckpointError("unsupported checkpoint schema_version " +
                          std::to_string(ckpt.schema_version));
  const auto meta = nlohmann::json::parse(get_bytes(in, get<uint64_t>(in)));
  ckpt.config = meta.at("config").get<ModelConfig>();
  ckpt.extra = meta.value("extra", nlohmann::json::object());

  const auto count = get<uint32_t>(in);
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = get_bytes(in, get<uint32_t>(in));
    const auto dtype = dtype_from_code(get<uint8_t>(in));
    const auto rank = get<uint8_t>(in);
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) d = get<int64_t>(in);
    const auto bytes = get<uint64_t>(in);
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (static_cast<uint64_t>(t.numel() * t.element_size()) != bytes)
      throw CheckpointError("tensor '" + name + "' byte length does not match its shape");
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
    if (!in) throw CheckpointError("truncated checkpoint");
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

std::map<std::string, torch::Tensor> state_dict(const torch::nn::Module& net) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : net.named_parameters(true)) out.emplace(p.key(), p.value());
  for (const auto& b : net.named_buffers(true)) out.emplace(b.key(), b.value());
  return out;
}

void save_model(const std::filesystem::path& path, const SodaNet& net,
                const nlohmann::json& extra) {
  Checkpoint ckpt;
  ckpt.config = net->config();
  ckpt.extra = extra;
  ckpt.tensors = state_dict(*net);
  write_checkpoint(path, ckpt);
}

void load_into(const Checkpoint& ckpt, SodaNet& net) {
  const auto differences = diff(ckpt.config, net->config());
  if (!differences.empty()) {
    std::string msg = "checkpoint config does not match model config (checkpoint != model):";
    for (const auto& d : differences) msg += "\n  " + d;
    throw CheckpointError(msg);
  }
  torch::NoGradGuard no_grad;
  for (auto& [name, target] : state_dict(*net)) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw CheckpointError("checkpoint lacks tensor '" + name + "'");
    if (it->second.sizes() != target.sizes() || it->second.scalar_type() != target.scalar_type())
      throw CheckpointError("tensor '" + name + "' has mismatched shape or dtype");
    target.copy_(it->second);
  }
}

SodaNet load_model(const std::filesystem::path& path) {
  const auto ckpt = read_checkpoint(path);
  SodaNet net(ckpt.config);
  load_into(ckpt, net);
  return net;
}

}  // namespace soda::model
