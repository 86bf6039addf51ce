#include "pcreal/net.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace pcreal::net {

// Checkpoint container, version 1. Little-endian throughout:
//   magic "PCRLCKP1"
//   u32 flags            bit 0: Adam state present
//   u32 num_datasets     adversary output width
//   f32 lambda
//   u32 q1, k1, q2, k2
//   f32 leaky_slope
//   i64 step t
//   u32 array count, then per array:
//     u16 name length, name bytes
//     u32 rank, u32 d0, u32 d1, u32 d2
//     f32 data (d0*d1*d2 values, row-major)

namespace {

constexpr char kMagic[8] = {'P', 'C', 'R', 'L', 'C', 'K', 'P', '1'};

template <typename V>
void write_pod(std::ofstream& f, V v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::ifstream& f, const std::string& path) {
  V v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!f)
    throw std::runtime_error("checkpoint '" + path + "': truncated at byte " +
                             std::to_string(static_cast<long long>(f.gcount())));
  return v;
}

void write_array(std::ofstream& f, const std::string& name, const Tensor& t) {
  write_pod<std::uint16_t>(f, static_cast<std::uint16_t>(name.size()));
  f.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(t.rank));
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(t.d0));
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(t.d1));
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(t.d2));
  f.write(reinterpret_cast<const char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(float)));
}

}  // namespace

void save_checkpoint(const std::string& path, const MetricModel& model, const AdamState* adam) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write(kMagic, 8);
  write_pod<std::uint32_t>(f, adam ? 1u : 0u);
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(model.cfg.num_datasets));
  write_pod<float>(f, model.cfg.lambda);
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(model.cfg.q1));
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(model.cfg.k1));
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(model.cfg.q2));
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(model.cfg.k2));
  write_pod<float>(f, model.cfg.leaky_slope);
  write_pod<std::int64_t>(f, adam ? static_cast<std::int64_t>(adam->t) : 0);

  std::uint32_t count = 0;
  model.visit([&](const std::string&, const Tensor&) { ++count; });
  if (adam) count *= 3;
  write_pod<std::uint32_t>(f, count);

  model.visit([&](const std::string& n, const Tensor& t) { write_array(f, n, t); });
  if (adam) {
    adam->m.visit([&](const std::string& n, const Tensor& t) { write_array(f, "adam.m." + n, t); });
    adam->v.visit([&](const std::string& n, const Tensor& t) { write_array(f, "adam.v." + n, t); });
  }
  if (!f) throw std::runtime_error("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint '" + path + "': bad magic at byte 0");

  Checkpoint ck;
  std::uint32_t flags = read_pod<std::uint32_t>(f, path);
  ck.has_adam = (flags & 1u) != 0;
  ModelConfig cfg;
  cfg.num_datasets = static_cast<int>(read_pod<std::uint32_t>(f, path));
  cfg.lambda = read_pod<float>(f, path);
  cfg.q1 = static_cast<int>(read_pod<std::uint32_t>(f, path));
  cfg.k1 = static_cast<int>(read_pod<std::uint32_t>(f, path));
  cfg.q2 = static_cast<int>(read_pod<std::uint32_t>(f, path));
  cfg.k2 = static_cast<int>(read_pod<std::uint32_t>(f, path));
  cfg.leaky_slope = read_pod<float>(f, path);
  std::int64_t step = read_pod<std::int64_t>(f, path);

  ck.model = MetricModel::create(cfg, 0);
  ck.adam = AdamState::zeros_like(ck.model);
  ck.adam.t = step;

  std::map<std::string, Tensor*> slots;
  ck.model.visit([&](const std::string& n, Tensor& t) { slots[n] = &t; });
  ck.adam.m.visit([&](const std::string& n, Tensor& t) { slots["adam.m." + n] = &t; });
  ck.adam.v.visit([&](const std::string& n, Tensor& t) { slots["adam.v." + n] = &t; });

  std::uint32_t count = read_pod<std::uint32_t>(f, path);
  std::map<std::string, bool> loaded;
  for (std::uint32_t a = 0; a < count; ++a) {
    auto offset = f.tellg();
    std::uint16_t len = read_pod<std::uint16_t>(f, path);
    std::string name(len, '\0');
    f.read(name.data(), len);
    loaded[name] = true;
    std::uint32_t rank = read_pod<std::uint32_t>(f, path);
    std::uint32_t d0 = read_pod<std::uint32_t>(f, path);
    std::uint32_t d1 = read_pod<std::uint32_t>(f, path);
    std::uint32_t d2 = read_pod<std::uint32_t>(f, path);
    auto it = slots.find(name);
    if (it == slots.end())
      throw std::runtime_error("checkpoint '" + path + "': unknown array '" + name +
                               "' at byte " + std::to_string(static_cast<long long>(offset)));
    Tensor& t = *it->second;
    if (static_cast<int>(rank) != t.rank || static_cast<int>(d0) != t.d0 ||
        static_cast<int>(d1) != t.d1 || static_cast<int>(d2) != t.d2)
      throw std::runtime_error("checkpoint '" + path + "': shape mismatch for '" + name +
                               "' at byte " + std::to_string(static_cast<long long>(offset)));
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!f)
      throw std::runtime_error("checkpoint '" + path + "': truncated array '" + name + "'");
  }
  ck.model.visit([&](const std::string& n, Tensor&) {
    if (!loaded.count(n))
      throw std::runtime_error("checkpoint '" + path + "': missing array '" + n + "'");
  });
  return ck;
}

}  // namespace pcreal::net
