#include "pcreal/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pcreal::io {

namespace {

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return ext;
}

[[noreturn]] void malformed(const std::string& path, std::size_t byte_offset,
                            const std::string& what) {
  throw std::runtime_error("malformed file '" + path + "' at byte " +
                           std::to_string(byte_offset) + ": " + what);
}

}  // namespace

std::string format_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_xyz(const std::string& path, const PointCloud& pc) {
  std::string out;
  out.reserve(pc.points.size() * 48);
  for (const auto& p : pc.points) {
    out += format_double(p.x);
    out += ' ';
    out += format_double(p.y);
    out += ' ';
    out += format_double(p.z);
    out += '\n';
  }
  write_text_file(path, out);
}

PointCloud load_xyz(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  PointCloud pc;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(f, line)) {
    std::size_t line_start = offset;
    offset += line.size() + 1;
    // tolerate blank lines
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    double x, y, z;
    int consumed = 0;
    if (std::sscanf(line.c_str(), " %lf %lf %lf %n", &x, &y, &z, &consumed) != 3)
      malformed(path, line_start, "expected three numbers per line");
    if (static_cast<std::size_t>(consumed) < line.find_last_not_of(" \t\r") + 1)
      malformed(path, line_start + consumed, "trailing content after x y z");
    pc.points.push_back({x, y, z});
  }
  return pc;
}

void save_bin(const std::string& path, const PointCloud& pc) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  for (const auto& p : pc.points) {
    float v[3] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
    f.write(reinterpret_cast<const char*>(v), sizeof(v));
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

PointCloud load_bin(const std::string& path, CloudFormat format) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  const std::size_t size = static_cast<std::size_t>(f.tellg());
  f.seekg(0);

  std::size_t stride;
  if (format == CloudFormat::Bin3) {
    stride = 12;
  } else if (format == CloudFormat::Bin4) {
    stride = 16;
  } else {  // Auto: prefer the native 3-column layout
    if (size % 12 == 0)
      stride = 12;
    else if (size % 16 == 0)
      stride = 16;
    else
      malformed(path, size - size % 4, "size fits neither 12- nor 16-byte records");
  }
  if (size % stride != 0)
    malformed(path, size - size % stride, "trailing bytes do not form a full record");

  PointCloud pc;
  const std::size_t n = size / stride;
  pc.points.resize(n);
  std::vector<char> buf(size);
  f.read(buf.data(), static_cast<std::streamsize>(size));
  if (!f) throw std::runtime_error("read failed: " + path);
  for (std::size_t i = 0; i < n; ++i) {
    float v[4] = {0, 0, 0, 0};
    std::memcpy(v, buf.data() + i * stride, stride);
    pc.points[i] = {v[0], v[1], v[2]};
  }
  return pc;
}

void save_ply(const std::string& path, const PointCloud& pc,
              const std::vector<std::array<std::uint8_t, 3>>* colors) {
  if (colors && colors->size() != pc.points.size())
    throw std::invalid_argument("save_ply: color count does not match point count");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f << "ply\nformat binary_little_endian 1.0\n";
  f << "element vertex " << pc.points.size() << "\n";
  f << "property float x\nproperty float y\nproperty float z\n";
  f << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  f << "end_header\n";
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    const auto& p = pc.points[i];
    float v[3] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
    f.write(reinterpret_cast<const char*>(v), sizeof(v));
    std::array<std::uint8_t, 3> c = colors ? (*colors)[i] : std::array<std::uint8_t, 3>{200, 200, 200};
    f.write(reinterpret_cast<const char*>(c.data()), 3);
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

CloudFormat format_from_extension(const std::string& path) {
  std::string ext = lower_ext(path);
  if (ext == "xyz" || ext == "txt") return CloudFormat::Xyz;
  if (ext == "ply") return CloudFormat::Ply;
  return CloudFormat::Auto;  // .bin and friends resolve by stride
}

PointCloud load_cloud(const std::string& path, CloudFormat format) {
  if (format == CloudFormat::Auto) {
    CloudFormat by_ext = format_from_extension(path);
    if (by_ext == CloudFormat::Xyz) return load_xyz(path);
    if (by_ext == CloudFormat::Ply)
      throw std::runtime_error("PLY input is not supported; use xyz or binary: " + path);
    return load_bin(path, CloudFormat::Auto);
  }
  switch (format) {
    case CloudFormat::Xyz: return load_xyz(path);
    case CloudFormat::Bin3: return load_bin(path, CloudFormat::Bin3);
    case CloudFormat::Bin4: return load_bin(path, CloudFormat::Bin4);
    default: throw std::runtime_error("unsupported load format for: " + path);
  }
}

void save_cloud(const std::string& path, const PointCloud& pc, CloudFormat format) {
  if (format == CloudFormat::Auto) {
    CloudFormat by_ext = format_from_extension(path);
    if (by_ext == CloudFormat::Xyz) return save_xyz(path, pc);
    if (by_ext == CloudFormat::Ply) return save_ply(path, pc, nullptr);
    return save_bin(path, pc);
  }
  switch (format) {
    case CloudFormat::Xyz: return save_xyz(path, pc);
    case CloudFormat::Bin3: return save_bin(path, pc);
    case CloudFormat::Ply: return save_ply(path, pc, nullptr);
    default: throw std::runtime_error("unsupported save format for: " + path);
  }
}

KvConfig KvConfig::parse_string(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
    cfg.set(key, value);
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  return parse_string(read_text_file(path), path);
}

void KvConfig::set(const std::string& key, const std::string& value) {
  for (auto& e : entries) {
    if (e.first == key) {
      e.second = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

bool KvConfig::has(const std::string& key) const { return find(key) != nullptr; }

const std::string* KvConfig::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.first == key) return &e.second;
  return nullptr;
}

std::string KvConfig::get_or(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

std::string KvConfig::canonical() const {
  auto sorted = entries;
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (const auto& [k, v] : sorted) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

void append_csv_row(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace pcreal::io
