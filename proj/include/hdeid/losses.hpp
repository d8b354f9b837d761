#pragma once

#include <vector>

#include "hdeid/providers.hpp"
#include "hdeid/tensor.hpp"

namespace hdeid {

struct LossWeights {
  double id = 1.0;
  double attr = 1.0;
  double mask = 0.5;

  void validate() const;
};

// exp(-|f_src - f_gen|_2)
double identity_loss(const Tensor& f_src, const Tensor& f_gen);
// Gradient w.r.t. f_gen; zero where the two embeddings coincide.
Tensor identity_loss_grad(const Tensor& f_src, const Tensor& f_gen);

enum class AttributeLossVariant {
  kLiteral,    // sum_a p_a log(p_a / q_a)
  kBernoulli,  // per-attribute binary KL, adds the (1 - p) log((1 - p)/(1 - q)) term
};

double attribute_loss(const AttributeDistribution& a_src, const AttributeDistribution& a_gen,
                      AttributeLossVariant variant = AttributeLossVariant::kLiteral);
std::vector<double> attribute_loss_grad(const AttributeDistribution& a_src, const AttributeDistribution& a_gen,
                                        AttributeLossVariant variant = AttributeLossVariant::kLiteral);

// sum_i |x_i - x_hat_i| (1 - M_i), mask broadcast over channels.
double mask_loss(const ImageTensor& x, const ImageTensor& x_hat, const FaceMask& mask);
// Subgradient w.r.t. x_hat; 0 where x == x_hat.
Tensor mask_loss_grad(const ImageTensor& x, const ImageTensor& x_hat, const FaceMask& mask);

struct LossBreakdown {
  double total = 0.0;
  double id = 0.0;    // unweighted
  double attr = 0.0;  // unweighted
  double mask = 0.0;  // unweighted
};

LossBreakdown combine_losses(double id, double attr, double mask, const LossWeights& weights);

/// Source-side quantities, computed once per image.
struct SourceFeatures {
  ImageTensor image;
  Tensor embedding;
  AttributeDistribution attributes;  // target of the attribute term (may carry overrides)
  FaceMask mask;
};

struct OptimizationProviders {
  const IdentityEmbedder* embedder = nullptr;
  const AttributePredictor* attributes = nullptr;
  const FaceParser* parser = nullptr;
};

// Runs the three providers on the source image. Provider failures are
// rethrown as ProviderError naming the provider.
SourceFeatures extract_source_features(const ImageTensor& x, const OptimizationProviders& providers);

struct TotalLoss {
  LossBreakdown terms;
  Tensor grad;  // d total / d x_hat
};

/// Weighted reagent objective on a generated image, with its image gradient.
TotalLoss total_loss(const SourceFeatures& source, const ImageTensor& x_hat, const OptimizationProviders& providers,
                     const LossWeights& weights,
                     AttributeLossVariant variant = AttributeLossVariant::kLiteral);

}  // namespace hdeid
