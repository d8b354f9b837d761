#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hdeid/errors.hpp"
#include "hdeid/pooling.hpp"
#include "hdeid/registry.hpp"
#include "hdeid/tensor.hpp"

namespace hdeid {

/// Probabilities clamped to [kAttributeEpsilon, 1 - kAttributeEpsilon].
class AttributeDistribution {
 public:
  static constexpr std::size_t kCelebACount = 40;

  AttributeDistribution() = default;
  explicit AttributeDistribution(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& values() const { return probs_; }

  friend bool operator==(const AttributeDistribution&, const AttributeDistribution&) = default;

 private:
  std::vector<double> probs_;
};

inline constexpr double kAttributeEpsilon = 1e-8;

/// Per-pixel face probability, H x W, values in [0, 1].
class FaceMask : public Tensor {
 public:
  FaceMask() = default;
  explicit FaceMask(Tensor values);
  std::size_t height() const { return shape()[0]; }
  std::size_t width() const { return shape()[1]; }
};

// Optimization-path providers must be differentiable w.r.t. the image.

class IdentityEmbedder {
 public:
  virtual ~IdentityEmbedder() = default;
  virtual std::string name() const = 0;
  virtual Tensor embed(const ImageTensor& image) const = 0;
  virtual Tensor embed_vjp(const ImageTensor& image, const Tensor& grad_embedding) const = 0;
  // Exclusive providers are serialized by the batch driver.
  virtual bool exclusive() const { return false; }
};

class AttributePredictor {
 public:
  virtual ~AttributePredictor() = default;
  virtual std::string name() const = 0;
  virtual AttributeDistribution predict(const ImageTensor& image) const = 0;
  virtual Tensor predict_vjp(const ImageTensor& image, const std::vector<double>& grad_probs) const = 0;
  virtual bool exclusive() const { return false; }
};

class FaceParser {
 public:
  virtual ~FaceParser() = default;
  virtual std::string name() const = 0;
  virtual FaceMask parse(const ImageTensor& image) const = 0;
  virtual bool exclusive() const { return false; }
};

struct PoseAngles {
  double pitch = 0.0, yaw = 0.0, roll = 0.0;  // degrees
};

struct GazeAngles {
  double pitch = 0.0, yaw = 0.0;  // degrees
};

/// Evaluation-side models. These need not be differentiable and use a
/// different recognition network than the optimization path.
class EvalProviders {
 public:
  virtual ~EvalProviders() = default;
  virtual std::string name() const = 0;
  virtual Tensor recog_embed(const ImageTensor& image) const = 0;
  virtual std::string emotion(const ImageTensor& image) const = 0;
  virtual std::string gender(const ImageTensor& image) const = 0;
  virtual PoseAngles pose(const ImageTensor& image) const = 0;
  virtual GazeAngles gaze(const ImageTensor& image) const = 0;
  virtual std::array<bool, 2> detect(const ImageTensor& image) const = 0;
  virtual bool exclusive() const { return false; }
};

// ---------------------------------------------------------------------------
// Deterministic analytic stand-ins

/// embed(x) = W block_pool(x), W fixed Gaussian.
class ToyIdentityEmbedder final : public IdentityEmbedder {
 public:
  explicit ToyIdentityEmbedder(std::size_t dim = 128, std::uint64_t seed = 11, std::size_t grid = 8,
                               double gain = 4.0);
  std::string name() const override { return "toy"; }
  Tensor embed(const ImageTensor& image) const override;
  Tensor embed_vjp(const ImageTensor& image, const Tensor& grad_embedding) const override;

 private:
  std::size_t grid_;
  DenseMatrix weights_;
};

/// sigmoid of 40 fixed linear functionals of the pooled image.
class ToyAttributePredictor final : public AttributePredictor {
 public:
  explicit ToyAttributePredictor(std::uint64_t seed = 13, std::size_t grid = 8, double gain = 3.0);
  std::string name() const override { return "toy"; }
  AttributeDistribution predict(const ImageTensor& image) const override;
  Tensor predict_vjp(const ImageTensor& image, const std::vector<double>& grad_probs) const override;

 private:
  std::vector<double> logits(const ImageTensor& image) const;
  std::size_t grid_;
  DenseMatrix weights_;
  std::vector<double> bias_;
};

/// Centered soft ellipse, independent of image content.
class ToyFaceParser final : public FaceParser {
 public:
  explicit ToyFaceParser(double radius_y = 0.38, double radius_x = 0.30, double sharpness = 12.0);
  std::string name() const override { return "toy"; }
  FaceMask parse(const ImageTensor& image) const override;

 private:
  double radius_y_, radius_x_, sharpness_;
};

/// Thresholded functionals for labels, linear functionals for angles,
/// detectors that always fire.
class ToyEvalProviders final : public EvalProviders {
 public:
  explicit ToyEvalProviders(std::uint64_t seed = 17, std::size_t grid = 8);
  std::string name() const override { return "toy"; }
  Tensor recog_embed(const ImageTensor& image) const override;
  std::string emotion(const ImageTensor& image) const override;
  std::string gender(const ImageTensor& image) const override;
  PoseAngles pose(const ImageTensor& image) const override;
  GazeAngles gaze(const ImageTensor& image) const override;
  std::array<bool, 2> detect(const ImageTensor& image) const override;

 private:
  std::size_t grid_;
  DenseMatrix recog_;
  DenseMatrix emotion_;
  DenseMatrix gender_;
  DenseMatrix pose_;
  DenseMatrix gaze_;
};

// Process-wide registries, pre-populated with "toy" and the pretrained-model
// adapter entries.
AdapterRegistry<IdentityEmbedder>& embedder_registry();
AdapterRegistry<AttributePredictor>& attribute_registry();
AdapterRegistry<FaceParser>& parser_registry();
AdapterRegistry<EvalProviders>& eval_registry();

}  // namespace hdeid
