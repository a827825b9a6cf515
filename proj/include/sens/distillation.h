#ifndef SENS_DISTILLATION_H_
#define SENS_DISTILLATION_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sens/autodiff.h"

namespace sens {

struct LossWeights {
  double alpha = 0.2;
  double fastemit_lambda = 0.006;

  void Validate() const;
};

class TeacherProvider {
 public:
  virtual ~TeacherProvider() = default;
  virtual int dim() const = 0;
  // `text` is the full transcription; file-backed teachers key on `utt_id`.
  virtual std::vector<float> Embed(std::string_view utt_id, std::string_view text) const = 0;
};

// Pseudo-random unit vector seeded by FNV-1a of the text.
class HashTeacher : public TeacherProvider {
 public:
  explicit HashTeacher(int dim);
  int dim() const override { return dim_; }
  std::vector<float> Embed(std::string_view utt_id, std::string_view text) const override;

 private:
  int dim_;
};

// "#dim=N" header, then "utt_id<TAB>base64(little-endian float32)" lines.
class FileTeacher : public TeacherProvider {
 public:
  FileTeacher(int dim, std::map<std::string, std::vector<float>> table);
  static FileTeacher Load(const std::string& path);
  static void Save(const std::string& path, int dim,
                   const std::map<std::string, std::vector<float>>& table);

  int dim() const override { return dim_; }
  std::vector<float> Embed(std::string_view utt_id, std::string_view text) const override;

 private:
  int dim_;
  std::map<std::string, std::vector<float>> table_;
};

std::string Base64Encode(std::span<const uint8_t> bytes);
std::vector<uint8_t> Base64Decode(std::string_view text);

// Mean over chunks and dimensions of (C_gamma - teacher)^2; every context is
// [1, D] and teacher is [1, D].
template <typename T>
Var<T> MseLoss(Tape<T>& tape, const std::vector<Var<T>>& contexts, const Tensor<T>& teacher);

template <typename T>
Var<T> TotalLoss(Tape<T>& tape, Var<T> rnnt, Var<T> mse, const LossWeights& w);

inline double TotalLoss(double rnnt, double mse, const LossWeights& w) {
  return rnnt + w.alpha * mse;
}

}  // namespace sens

#endif  // SENS_DISTILLATION_H_
