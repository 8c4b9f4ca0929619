#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rotamatch/checkpoint.hpp"
#include "rotamatch/geometry.hpp"
#include "rotamatch/keypoints.hpp"
#include "rotamatch/rng.hpp"
#include "rotamatch/tensor.hpp"

namespace rotamatch::pipeline {

// Architecture hyperparameters; width is the matcher token size and must
// equal desc_dim so tokens are descriptor + positional embedding.
struct PipelineConfig {
  int patch_size = 16;
  int desc_dim = 64;
  std::vector<int> conv_channels = {8, 16, 32};
  int n_layers = 6;
  int width = 64;
  int n_heads = 1;
  int n_freqs = 8;
  double tau = 0.1;

  void validate() const;
};

// Patch descriptor g. Three stride-2 2x2 conv stages followed by two dense
// layers, output rows L2-normalized.
struct DescriptorNet {
  PipelineConfig cfg;
  std::vector<Tensor> conv_w, conv_b;  // conv_w[i]: (4*c_in, c_out)
  Tensor fc0_w, fc0_b, fc1_w, fc1_b;

  static DescriptorNet init(const PipelineConfig& cfg, Rng& rng);
  NamedTensors params();
  // patches: (n, patch_size*patch_size*3) -> (n, desc_dim), unit rows
  Tensor forward(Tape* tape, const Tensor& patches) const;
};

// Attention matcher h. Per layer: self-attention, bidirectional
// cross-attention, feed-forward, all pre-LN with residuals. Weights are
// shared between the two images within a block. A single final projection
// reads out refined descriptors at any depth.
struct MatcherNet {
  struct Attn {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Ffn {
    Tensor w1, b1, w2, b2;
  };

  PipelineConfig cfg;
  Tensor pos_w, pos_b;  // sinusoid features (4*n_freqs) -> width
  std::vector<Attn> self_attn, cross_attn;
  std::vector<Ffn> ffn;
  Tensor final_w, final_b;

  static MatcherNet init(const PipelineConfig& cfg, Rng& rng);
  NamedTensors params();
};

struct AssignmentMatrix {
  Tensor S;         // similarity, n x m
  Tensor row_sm;    // softmax over rows of S
  Tensor col_sm;    // softmax over columns of S
  Tensor P;         // elementwise product, the soft assignment
  double tau = 0.1;

  struct Match {
    int i, j;
    double score;
  };
  std::vector<Match> matches;  // strict mutual maxima of P with P_ij >= tau
};

// Bilinear patch extraction around each position, zero-padded at borders.
// Output (n, patch_size*patch_size*3), not tracked by any tape.
Tensor extract_patches(const geom::Image& image,
                       const std::vector<geom::Vector2d>& positions,
                       int patch_size);

// Sinusoidal embedding of positions normalized to [-1,1]: (n, 4*n_freqs).
Tensor position_features(const std::vector<geom::Vector2d>& positions, int width,
                         int height, int n_freqs);

// Runs the descriptor on patches extracted at the given positions.
KeypointSet describe(Tape* tape, const DescriptorNet& net, const geom::Image& image,
                     const std::vector<geom::Vector2d>& positions);

// Refined descriptor pairs after every layer 1..L.
struct MatchTrace {
  std::vector<std::pair<Tensor, Tensor>> layers;
};

MatchTrace match_forward(Tape* tape, const MatcherNet& net, const KeypointSet& kps_a,
                         const KeypointSet& kps_b);

AssignmentMatrix assign(Tape* tape, const Tensor& da, const Tensor& db, double tau);

// describe -> match_forward truncated at stop_layer (1-based; 0 = full depth)
// -> assign.
AssignmentMatrix match_pair(const DescriptorNet& desc, const MatcherNet& matcher,
                            const geom::ViewPair& pair,
                            const std::vector<geom::Vector2d>& positions_a,
                            const std::vector<geom::Vector2d>& positions_b,
                            int stop_layer, double tau);

// Checkpoint sidecar: architecture echo plus the training regime tag. eval
// refuses checkpoints whose sidecar disagrees with the requested config.
void write_sidecar(const std::filesystem::path& path, const PipelineConfig& cfg,
                   const std::string& regime);
std::pair<PipelineConfig, std::string> read_sidecar(const std::filesystem::path& path);

void save_models(const std::filesystem::path& dir, const DescriptorNet& desc,
                 const MatcherNet& matcher, const std::string& regime);
std::pair<DescriptorNet, MatcherNet> load_models(const std::filesystem::path& dir);

}  // namespace rotamatch::pipeline
