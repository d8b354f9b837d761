#pragma once

#include <array>
#include <vector>

#include "hdeid/evaluation.hpp"

namespace hdeid::testdata {

struct PublishedRow {
  const char* method;
  const char* dataset;
  hdeid::ColumnMeans means;
  double overall;
};

// Six published column means and the published overall, per method and dataset.
inline const std::vector<PublishedRow>& published_rows() {
  static const std::vector<PublishedRow> rows = {
      {"CIAGAN", "celeba-hq", {0.852, 0.984, 0.470, 0.635, 0.518, 0.167}, 0.588},
      {"DiffAM", "celeba-hq", {0.507, 0.999, 0.500, 0.810, 0.774, 0.514}, 0.653},
      {"AMT-GAN", "celeba-hq", {0.492, 0.999, 0.653, 0.855, 0.787, 0.658}, 0.681},
      {"DeepPrivacy2", "celeba-hq", {0.696, 1.000, 0.536, 0.897, 0.458, 0.530}, 0.714},
      {"Repaint", "celeba-hq", {0.691, 0.999, 0.501, 0.871, 0.605, 0.575}, 0.734},
      {"Diff-Privacy", "celeba-hq", {0.921, 0.982, 0.543, 0.686, 0.586, 0.407}, 0.756},
      {"Diffprivate", "celeba-hq", {0.810, 1.000, 0.565, 0.752, 0.436, 0.618}, 0.752},
      {"tangent edit", "celeba-hq", {0.685, 1.000, 0.660, 0.907, 0.674, 0.651}, 0.776},
      {"linear edit", "celeba-hq", {0.739, 1.000, 0.620, 0.883, 0.646, 0.638}, 0.786},
      {"CIAGAN", "ffhq", {0.857, 0.986, 0.425, 0.650, 0.466, 0.126}, 0.528},
      {"DiffAM", "ffhq", {0.515, 1.000, 0.493, 0.763, 0.767, 0.473}, 0.648},
      {"AMT-GAN", "ffhq", {0.408, 1.000, 0.668, 0.841, 0.821, 0.638}, 0.623},
      {"DeepPrivacy2", "ffhq", {0.652, 1.000, 0.519, 0.802, 0.366, 0.479}, 0.662},
      {"Repaint", "ffhq", {0.772, 0.998, 0.382, 0.721, 0.440, 0.369}, 0.660},
      {"Diff-Privacy", "ffhq", {0.901, 0.987, 0.504, 0.711, 0.536, 0.320}, 0.711},
      {"Diffprivate", "ffhq", {0.806, 1.000, 0.536, 0.579, 0.440, 0.537}, 0.719},
      {"tangent edit", "ffhq", {0.683, 1.000, 0.599, 0.827, 0.584, 0.537}, 0.736},
      {"linear edit", "ffhq", {0.697, 1.000, 0.581, 0.799, 0.562, 0.512}, 0.730},
  };
  return rows;
}

}  // namespace hdeid::testdata
