#ifndef SENS_IO_H_
#define SENS_IO_H_

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sens/autodiff.h"

namespace sens {

// Feature file: "FEAT", u32 frames, u32 dim, little-endian float32 row-major.
std::string EncodeFeatures(const Tensor<float>& features);
Tensor<float> DecodeFeatures(std::string_view bytes);
void WriteFeatures(const std::string& path, const Tensor<float>& features);
Tensor<float> ReadFeatures(const std::string& path);

// Checkpoint: "SENS", u32 version, u32 count, then per tensor u16 name
// length, name, u8 rank, u32 dims, little-endian float32 values.
inline constexpr uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

std::string EncodeCheckpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> DecodeCheckpoint(std::string_view bytes);

template <typename T>
std::vector<NamedTensor> Snapshot(const ParameterList<T>& params);
// Every parameter must be present with a matching shape.
template <typename T>
void Restore(const std::vector<NamedTensor>& tensors, const ParameterList<T>& params);

void SaveCheckpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> LoadCheckpoint(const std::string& path);

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view bytes);

// Manifest lines: id<TAB>speaker<TAB>feature_path<TAB>transcript. Relative
// feature paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string id;
  std::string speaker;
  std::string feature_path;
  std::string transcript;
};

std::vector<ManifestEntry> LoadManifest(const std::string& path);
void SaveManifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// Transcript files: id<TAB>text per line.
std::vector<std::pair<std::string, std::string>> LoadTranscripts(const std::string& path);
void SaveTranscripts(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& lines);

}  // namespace sens

#endif  // SENS_IO_H_
