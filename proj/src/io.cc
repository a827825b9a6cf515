#include "sens/io.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sens/error.h"

namespace sens {

namespace {

class Writer {
 public:
  void U8(uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void U16(uint16_t v) {
    for (int b = 0; b < 2; ++b) U8(static_cast<uint8_t>(v >> (8 * b)));
  }
  void U32(uint32_t v) {
    for (int b = 0; b < 4; ++b) U8(static_cast<uint8_t>(v >> (8 * b)));
  }
  void F32(float f) { U32(std::bit_cast<uint32_t>(f)); }
  void Bytes(std::string_view s) { out_.append(s); }
  std::string Take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view bytes, const char* what) : bytes_(bytes), what_(what) {}

  void Need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string(what_) + ": truncated");
  }
  uint8_t U8() {
    Need(1);
    return static_cast<uint8_t>(bytes_[pos_++]);
  }
  uint16_t U16() {
    uint16_t v = 0;
    for (int b = 0; b < 2; ++b) v |= static_cast<uint16_t>(U8()) << (8 * b);
    return v;
  }
  uint32_t U32() {
    uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<uint32_t>(U8()) << (8 * b);
    return v;
  }
  float F32() { return std::bit_cast<float>(U32()); }
  std::string_view Bytes(std::size_t n) {
    Need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

void CheckMagic(Reader& r, std::string_view magic, const char* what) {
  if (r.Bytes(magic.size()) != magic) {
    throw FormatError(std::string(what) + ": bad magic bytes");
  }
}

std::vector<std::string> SplitTabs(const std::string& line, std::size_t max_fields) {
  std::vector<std::string> f;
  std::size_t start = 0;
  while (f.size() + 1 < max_fields) {
    const auto tab = line.find('\t', start);
    if (tab == std::string::npos) break;
    f.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  f.push_back(line.substr(start));
  return f;
}

}  // namespace

std::string EncodeFeatures(const Tensor<float>& features) {
  if (features.empty() || features.rank() != 2) throw DimensionError("features must be [frames, dim]");
  Writer w;
  w.Bytes("FEAT");
  w.U32(static_cast<uint32_t>(features.rows()));
  w.U32(static_cast<uint32_t>(features.cols()));
  for (float v : features.values()) w.F32(v);
  return w.Take();
}

Tensor<float> DecodeFeatures(std::string_view bytes) {
  Reader r(bytes, "feature file");
  CheckMagic(r, "FEAT", "feature file");
  const uint32_t frames = r.U32(), dim = r.U32();
  if (frames == 0 || dim == 0) throw FormatError("feature file: zero frames or dim");
  r.Need(static_cast<std::size_t>(frames) * dim * 4);
  std::vector<float> data(static_cast<std::size_t>(frames) * dim);
  for (float& v : data) v = r.F32();
  if (!r.done()) throw FormatError("feature file: trailing bytes");
  return Tensor<float>({static_cast<int>(frames), static_cast<int>(dim)}, std::move(data));
}

void WriteFeatures(const std::string& path, const Tensor<float>& features) {
  WriteFile(path, EncodeFeatures(features));
}

Tensor<float> ReadFeatures(const std::string& path) { return DecodeFeatures(ReadFile(path)); }

std::string EncodeCheckpoint(const std::vector<NamedTensor>& tensors) {
  Writer w;
  w.Bytes("SENS");
  w.U32(kCheckpointVersion);
  w.U32(static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xffff) throw FormatError("checkpoint: tensor name too long");
    w.U16(static_cast<uint16_t>(t.name.size()));
    w.Bytes(t.name);
    w.U8(static_cast<uint8_t>(t.value.rank()));
    for (int d : t.value.shape()) w.U32(static_cast<uint32_t>(d));
    for (float v : t.value.values()) w.F32(v);
  }
  return w.Take();
}

std::vector<NamedTensor> DecodeCheckpoint(std::string_view bytes) {
  Reader r(bytes, "checkpoint");
  CheckMagic(r, "SENS", "checkpoint");
  const uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const uint32_t count = r.U32();
  std::vector<NamedTensor> out;
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = std::string(r.Bytes(r.U16()));
    if (!seen.insert(t.name).second) throw FormatError("checkpoint: duplicate tensor " + t.name);
    const int rank = r.U8();
    if (rank < 1) throw FormatError("checkpoint: tensor " + t.name + " has rank 0");
    Shape shape(rank);
    std::size_t n = 1;
    for (int& d : shape) {
      const uint32_t v = r.U32();
      if (v == 0 || v > 0x7fffffffu) throw FormatError("checkpoint: bad dim in " + t.name);
      d = static_cast<int>(v);
      n *= v;
    }
    r.Need(n * 4);
    std::vector<float> data(n);
    for (float& v : data) v = r.F32();
    t.value = Tensor<float>(shape, std::move(data));
    out.push_back(std::move(t));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return out;
}

template <typename T>
std::vector<NamedTensor> Snapshot(const ParameterList<T>& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back({p->name, p->value.template Cast<float>()});
  return out;
}

template <typename T>
void Restore(const std::vector<NamedTensor>& tensors, const ParameterList<T>& params) {
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.value;
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing tensor " + p->name);
    if (it->second->shape() != p->value.shape()) {
      throw DimensionError("checkpoint: tensor " + p->name + " is " +
                           ShapeString(it->second->shape()) + ", model expects " +
                           ShapeString(p->value.shape()));
    }
  }
  for (auto* p : params) p->value = by_name[p->name]->template Cast<T>();
}

void SaveCheckpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  WriteFile(path, EncodeCheckpoint(tensors));
}

std::vector<NamedTensor> LoadCheckpoint(const std::string& path) {
  return DecodeCheckpoint(ReadFile(path));
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

std::vector<ManifestEntry> LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  const auto dir = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> out;
  std::set<std::string> ids;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = SplitTabs(line, 4);
    if (f.size() != 4) {
      throw FormatError(path + ":" + std::to_string(n) + ": expected id, speaker, features, transcript");
    }
    if (!ids.insert(f[0]).second) throw FormatError(path + ": duplicate utterance id " + f[0]);
    std::filesystem::path feat(f[2]);
    if (feat.is_relative()) feat = dir / feat;
    out.push_back({f[0], f[1], feat.string(), f[3]});
  }
  return out;
}

void SaveManifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  for (const auto& e : entries) {
    out << e.id << '\t' << e.speaker << '\t' << e.feature_path << '\t' << e.transcript << '\n';
  }
}

std::vector<std::pair<std::string, std::string>> LoadTranscripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transcripts " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = SplitTabs(line, 2);
    out.emplace_back(f[0], f.size() > 1 ? f[1] : "");
  }
  return out;
}

void SaveTranscripts(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& lines) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write transcripts " + path);
  for (const auto& [id, text] : lines) out << id << '\t' << text << '\n';
}

template std::vector<NamedTensor> Snapshot(const ParameterList<float>&);
template std::vector<NamedTensor> Snapshot(const ParameterList<double>&);
template void Restore(const std::vector<NamedTensor>&, const ParameterList<float>&);
template void Restore(const std::vector<NamedTensor>&, const ParameterList<double>&);

}  // namespace sens
