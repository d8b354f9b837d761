#include "hdeid/losses.hpp"

#include <cmath>
#include <string>

#include "hdeid/errors.hpp"

namespace hdeid {

void LossWeights::validate() const {
  if (!(id >= 0.0 && attr >= 0.0 && mask >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

double identity_loss(const Tensor& f_src, const Tensor& f_gen) {
  if (f_src.size() != f_gen.size()) {
    throw ShapeError("identity_loss: embedding dimensions differ (" + std::to_string(f_src.size()) + " vs " +
                     std::to_string(f_gen.size()) + ")");
  }
  return std::exp(-norm(f_src.reshaped(f_gen.shape()) - f_gen));
}

Tensor identity_loss_grad(const Tensor& f_src, const Tensor& f_gen) {
  if (f_src.size() != f_gen.size()) throw ShapeError("identity_loss_grad: embedding dimensions differ");
  Tensor diff = f_gen - f_src.reshaped(f_gen.shape());
  const double d = norm(diff);
  if (d == 0.0) return Tensor(f_gen.shape());
  diff *= -std::exp(-d) / d;
  return diff;
}

namespace {

void check_lengths(const AttributeDistribution& a, const AttributeDistribution& b) {
  if (a.size() != b.size()) {
    throw ShapeError("attribute_loss: distributions have " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " entries");
  }
}

}  // namespace

double attribute_loss(const AttributeDistribution& a_src, const AttributeDistribution& a_gen,
                      AttributeLossVariant variant) {
  check_lengths(a_src, a_gen);
  double acc = 0.0;
  for (std::size_t i = 0; i < a_src.size(); ++i) {
    const double p = a_src[i];
    const double q = a_gen[i];
    acc += p * std::log(p / q);
    if (variant == AttributeLossVariant::kBernoulli) acc += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  }
  return acc;
}

std::vector<double> attribute_loss_grad(const AttributeDistribution& a_src, const AttributeDistribution& a_gen,
                                        AttributeLossVariant variant) {
  check_lengths(a_src, a_gen);
  std::vector<double> g(a_src.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double p = a_src[i];
    const double q = a_gen[i];
    g[i] = -p / q;
    if (variant == AttributeLossVariant::kBernoulli) g[i] += (1.0 - p) / (1.0 - q);
  }
  return g;
}

namespace {

void check_mask(const ImageTensor& x, const ImageTensor& x_hat, const FaceMask& mask) {
  require_same_shape(x, x_hat, "mask_loss");
  if (mask.shape().size() != 2 || mask.height() != x.height() || mask.width() != x.width()) {
    throw ShapeError("mask_loss: mask " + shape_string(mask.shape()) + " does not match image " +
                     shape_string(x.shape()));
  }
}

}  // namespace

double mask_loss(const ImageTensor& x, const ImageTensor& x_hat, const FaceMask& mask) {
  check_mask(x, x_hat, mask);
  double acc = 0.0;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    const double w = 1.0 - mask[p];
    for (std::size_t c = 0; c < 3; ++c) acc += std::abs(x[p * 3 + c] - x_hat[p * 3 + c]) * w;
  }
  return acc;
}

Tensor mask_loss_grad(const ImageTensor& x, const ImageTensor& x_hat, const FaceMask& mask) {
  check_mask(x, x_hat, mask);
  Tensor g(x.shape());
  for (std::size_t p = 0; p < mask.size(); ++p) {
    const double w = 1.0 - mask[p];
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = x_hat[p * 3 + c] - x[p * 3 + c];
      g[p * 3 + c] = d > 0.0 ? w : (d < 0.0 ? -w : 0.0);
    }
  }
  return g;
}

LossBreakdown combine_losses(double id, double attr, double mask, const LossWeights& w) {
  return {w.id * id + w.attr * attr + w.mask * mask, id, attr, mask};
}

namespace {

// Runs f, attaching the provider's name to anything it throws.
template <class F>
auto guarded(const std::string& provider, F&& f) {
  try {
    return f();
  } catch (const ProviderError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProviderError(provider, e.what());
  }
}

}  // namespace

SourceFeatures extract_source_features(const ImageTensor& x, const OptimizationProviders& providers) {
  if (!providers.embedder || !providers.attributes || !providers.parser) {
    throw ConfigError("optimization needs an identity embedder, an attribute predictor and a face parser");
  }
  SourceFeatures s;
  s.image = x;
  s.embedding = guarded(providers.embedder->name(), [&] { return providers.embedder->embed(x); });
  s.attributes = guarded(providers.attributes->name(), [&] { return providers.attributes->predict(x); });
  s.mask = guarded(providers.parser->name(), [&] { return providers.parser->parse(x); });
  return s;
}

TotalLoss total_loss(const SourceFeatures& source, const ImageTensor& x_hat, const OptimizationProviders& providers,
                     const LossWeights& weights, AttributeLossVariant variant) {
  TotalLoss out;
  out.grad = Tensor(x_hat.shape());

  const double l_id = guarded(providers.embedder->name(), [&] {
    const Tensor f_gen = providers.embedder->embed(x_hat);
    if (weights.id != 0.0) {
      axpy(weights.id, providers.embedder->embed_vjp(x_hat, identity_loss_grad(source.embedding, f_gen)), out.grad);
    }
    return identity_loss(source.embedding, f_gen);
  });

  const double l_attr = guarded(providers.attributes->name(), [&] {
    const AttributeDistribution a_gen = providers.attributes->predict(x_hat);
    if (weights.attr != 0.0) {
      axpy(weights.attr,
           providers.attributes->predict_vjp(x_hat, attribute_loss_grad(source.attributes, a_gen, variant)),
           out.grad);
    }
    return attribute_loss(source.attributes, a_gen, variant);
  });

  const double l_mask = mask_loss(source.image, x_hat, source.mask);
  if (weights.mask != 0.0) axpy(weights.mask, mask_loss_grad(source.image, x_hat, source.mask), out.grad);

  out.terms = combine_losses(l_id, l_attr, l_mask, weights);
  return out;
}

}  // namespace hdeid
