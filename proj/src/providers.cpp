#include "hdeid/providers.hpp"

#include <algorithm>
#include <cmath>

#include "hdeid/errors.hpp"

namespace hdeid {

AttributeDistribution::AttributeDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  for (double& p : probs_) {
    if (!std::isfinite(p)) throw NumericalError("attribute probability is not finite");
    p = std::clamp(p, kAttributeEpsilon, 1.0 - kAttributeEpsilon);
  }
}

FaceMask::FaceMask(Tensor values) : Tensor(std::move(values)) {
  if (shape().size() != 2) throw ShapeError("face mask must be HxW, got " + shape_string(shape()));
  for (double v : flat()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ShapeError("face mask values must lie in [0, 1]");
  }
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> scaled(std::vector<double> v, double s) {
  for (double& x : v) x *= s;
  return v;
}

}  // namespace

// --- identity embedder -------------------------------------------------------

ToyIdentityEmbedder::ToyIdentityEmbedder(std::size_t dim, std::uint64_t seed, std::size_t grid, double gain)
    : grid_(grid) {
  const std::size_t features = grid * grid * 3;
  weights_ = DenseMatrix::gaussian(dim, features, gain / std::sqrt(static_cast<double>(features)), seed);
}

Tensor ToyIdentityEmbedder::embed(const ImageTensor& image) const {
  std::vector<double> e = weights_.apply(block_pool(image, grid_));
  const std::size_t n = e.size();
  return Tensor(Shape{n}, std::move(e));
}

Tensor ToyIdentityEmbedder::embed_vjp(const ImageTensor& image, const Tensor& grad_embedding) const {
  if (grad_embedding.size() != weights_.rows) throw ShapeError("embedder vjp: gradient length mismatch");
  return block_pool_adjoint(weights_.apply_transposed(grad_embedding.values()), image.shape(), grid_);
}

// --- attribute predictor -----------------------------------------------------

ToyAttributePredictor::ToyAttributePredictor(std::uint64_t seed, std::size_t grid, double gain) : grid_(grid) {
  const std::size_t features = grid * grid * 3;
  weights_ = DenseMatrix::gaussian(AttributeDistribution::kCelebACount, features,
                                   gain / std::sqrt(static_cast<double>(features)), seed);
  bias_ = DenseMatrix::gaussian(AttributeDistribution::kCelebACount, 1, 1.0, seed + 1).data;
}

std::vector<double> ToyAttributePredictor::logits(const ImageTensor& image) const {
  std::vector<double> z = weights_.apply(block_pool(image, grid_));
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += bias_[i];
  return z;
}

AttributeDistribution ToyAttributePredictor::predict(const ImageTensor& image) const {
  std::vector<double> p = logits(image);
  for (double& v : p) v = sigmoid(v);
  return AttributeDistribution(std::move(p));
}

Tensor ToyAttributePredictor::predict_vjp(const ImageTensor& image, const std::vector<double>& grad_probs) const {
  if (grad_probs.size() != weights_.rows) throw ShapeError("attribute vjp: gradient length mismatch");
  std::vector<double> z = logits(image);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double s = sigmoid(z[i]);
    // Outputs pinned by the probability clamp do not move.
    const bool clamped = s < kAttributeEpsilon || s > 1.0 - kAttributeEpsilon;
    z[i] = clamped ? 0.0 : grad_probs[i] * s * (1.0 - s);
  }
  return block_pool_adjoint(weights_.apply_transposed(z), image.shape(), grid_);
}

// --- face parser -------------------------------------------------------------

ToyFaceParser::ToyFaceParser(double radius_y, double radius_x, double sharpness)
    : radius_y_(radius_y), radius_x_(radius_x), sharpness_(sharpness) {}

FaceMask ToyFaceParser::parse(const ImageTensor& image) const {
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  Tensor m(Shape{h, w});
  for (std::size_t y = 0; y < h; ++y) {
    const double dy = ((y + 0.5) / h - 0.5) / radius_y_;
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = ((x + 0.5) / w - 0.5) / radius_x_;
      m[y * w + x] = sigmoid(sharpness_ * (1.0 - (dx * dx + dy * dy)));
    }
  }
  return FaceMask(std::move(m));
}

// --- evaluation providers ----------------------------------------------------

namespace {
constexpr const char* kEmotions[] = {"angry", "disgust", "fear", "happy", "sad", "surprise", "neutral"};
constexpr double kAngleScale = 30.0;  // degrees per unit functional
}  // namespace

ToyEvalProviders::ToyEvalProviders(std::uint64_t seed, std::size_t grid) : grid_(grid) {
  const std::size_t features = grid * grid * 3;
  const double s = 1.0 / std::sqrt(static_cast<double>(features));
  recog_ = DenseMatrix::gaussian(256, features, s, seed);
  emotion_ = DenseMatrix::gaussian(7, features, s, seed + 1);
  gender_ = DenseMatrix::gaussian(1, features, s, seed + 2);
  pose_ = DenseMatrix::gaussian(3, features, s, seed + 3);
  gaze_ = DenseMatrix::gaussian(2, features, s, seed + 4);
}

Tensor ToyEvalProviders::recog_embed(const ImageTensor& image) const {
  std::vector<double> e = recog_.apply(block_pool(image, grid_));
  const std::size_t n = e.size();
  return Tensor(Shape{n}, std::move(e));
}

std::string ToyEvalProviders::emotion(const ImageTensor& image) const {
  const std::vector<double> s = emotion_.apply(block_pool(image, grid_));
  return kEmotions[std::max_element(s.begin(), s.end()) - s.begin()];
}

std::string ToyEvalProviders::gender(const ImageTensor& image) const {
  return gender_.apply(block_pool(image, grid_))[0] >= 0.0 ? "Man" : "Woman";
}

PoseAngles ToyEvalProviders::pose(const ImageTensor& image) const {
  const std::vector<double> a = scaled(pose_.apply(block_pool(image, grid_)), kAngleScale);
  return {a[0], a[1], a[2]};
}

GazeAngles ToyEvalProviders::gaze(const ImageTensor& image) const {
  const std::vector<double> a = scaled(gaze_.apply(block_pool(image, grid_)), kAngleScale);
  return {a[0], a[1]};
}

std::array<bool, 2> ToyEvalProviders::detect(const ImageTensor&) const { return {true, true}; }

// --- registries --------------------------------------------------------------

namespace {

// Pretrained networks are wrapped out of tree; these entries reserve the names
// and explain what is missing.
template <class Interface>
typename AdapterRegistry<Interface>::Factory pretrained_entry(std::string role, std::string name, std::string model) {
  return [role, name, model](const ProviderOptions& options) -> std::unique_ptr<Interface> {
    if (!options.count("weights")) {
      throw ConfigError("provider '" + name + "' wraps " + model + " and needs its checkpoint path (set " + role +
                        ".weights = <path>)");
    }
    throw ProviderError(name, "no inference runtime for " + model + " is linked into this build; register an "
                              "adapter under this name to use " + options.at("weights"));
  };
}

}  // namespace

AdapterRegistry<IdentityEmbedder>& embedder_registry() {
  static AdapterRegistry<IdentityEmbedder>* registry = [] {
    auto* r = new AdapterRegistry<IdentityEmbedder>("identity embedder");
    r->register_adapter("toy", [](const ProviderOptions& o) {
      return std::make_unique<ToyIdentityEmbedder>(option_u64(o, "dim", 128), option_u64(o, "seed", 11));
    });
    r->register_adapter("facenet", pretrained_entry<IdentityEmbedder>("embedder", "facenet", "FaceNet"));
    return r;
  }();
  return *registry;
}

AdapterRegistry<AttributePredictor>& attribute_registry() {
  static AdapterRegistry<AttributePredictor>* registry = [] {
    auto* r = new AdapterRegistry<AttributePredictor>("attribute predictor");
    r->register_adapter("toy", [](const ProviderOptions& o) {
      return std::make_unique<ToyAttributePredictor>(option_u64(o, "seed", 13));
    });
    r->register_adapter("facexformer",
                        pretrained_entry<AttributePredictor>("attributes", "facexformer", "FaceXFormer"));
    return r;
  }();
  return *registry;
}

AdapterRegistry<FaceParser>& parser_registry() {
  static AdapterRegistry<FaceParser>* registry = [] {
    auto* r = new AdapterRegistry<FaceParser>("face parser");
    r->register_adapter("toy", [](const ProviderOptions&) { return std::make_unique<ToyFaceParser>(); });
    r->register_adapter("facexformer", pretrained_entry<FaceParser>("parser", "facexformer", "FaceXFormer"));
    return r;
  }();
  return *registry;
}

AdapterRegistry<EvalProviders>& eval_registry() {
  static AdapterRegistry<EvalProviders>* registry = [] {
    auto* r = new AdapterRegistry<EvalProviders>("evaluation provider bundle");
    r->register_adapter("toy", [](const ProviderOptions& o) {
      return std::make_unique<ToyEvalProviders>(option_u64(o, "seed", 17));
    });
    r->register_adapter("arcface", pretrained_entry<EvalProviders>(
                                       "eval", "arcface", "ArcFace + DeepFace + FaceXFormer + L2CS-Net + Dlib/MTCNN"));
    return r;
  }();
  return *registry;
}

}  // namespace hdeid
