#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ifsd/image.hpp"

namespace ifsd::model {

struct ModelConfig {
  int image_size = 96;
  std::vector<int> backbone_channels = {32, 64, 96, 128};
  int hidden_dim = 64;
  int ffn_dim = 128;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;
  int num_queries = 20;
  int num_base = 3;
  int num_novel = 2;
  // Gaussian prior around each query's reference point in cross-attention.
  bool spatial_prior = true;

  /// Base + novel + one reserved proposal slot.
  int class_capacity() const { return num_base + num_novel + 1; }
  int feature_size() const;
  /// Throws std::invalid_argument when the configuration is inconsistent.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

enum class ParamGroup { kBackbone, kProjection, kTransformer, kClsHead, kRegHead };

const char* group_name(ParamGroup g);
ParamGroup parse_group(const std::string& name);

inline const std::set<ParamGroup> kAllGroups = {ParamGroup::kBackbone, ParamGroup::kProjection,
                                                ParamGroup::kTransformer, ParamGroup::kClsHead,
                                                ParamGroup::kRegHead};
inline const std::set<ParamGroup> kClassSpecific = {ParamGroup::kProjection,
                                                    ParamGroup::kClsHead};
inline const std::set<ParamGroup> kClassAgnostic = {
    ParamGroup::kBackbone, ParamGroup::kTransformer, ParamGroup::kRegHead};

/// Group of a parameter from its registered name. Throws on unknown names.
ParamGroup group_of(const std::string& parameter_name);

struct ModelOutput {
  torch::Tensor logits;    // [B, M, C]
  torch::Tensor boxes;     // [B, M, 4], center form in [0, 1]
  torch::Tensor features;  // [B, d, h, w], projection-layer output
};

class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(int dim, int heads);
  /// `bias` is added to the attention logits; shape broadcastable to
  /// [B, heads, Lq, Lk].
  torch::Tensor forward(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v,
                        const torch::Tensor& bias = {});

 private:
  int heads_;
  torch::nn::Linear q_proj_{nullptr}, k_proj_{nullptr}, v_proj_{nullptr}, out_proj_{nullptr};
};
TORCH_MODULE(MultiHeadAttention);

class EncoderLayerImpl : public torch::nn::Module {
 public:
  EncoderLayerImpl(int dim, int heads, int ffn);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& pos);

 private:
  MultiHeadAttention attn_{nullptr};
  torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
};
TORCH_MODULE(EncoderLayer);

class DecoderLayerImpl : public torch::nn::Module {
 public:
  DecoderLayerImpl(int dim, int heads, int ffn);
  /// `reference` [B, M, 2] and `grid` [HW, 2] drive the spatial prior; pass an
  /// undefined `reference` to disable it.
  torch::Tensor forward(const torch::Tensor& tgt, const torch::Tensor& query_pos,
                        const torch::Tensor& memory, const torch::Tensor& pos,
                        const torch::Tensor& reference, const torch::Tensor& grid);

 private:
  int heads_;
  MultiHeadAttention self_attn_{nullptr}, cross_attn_{nullptr};
  torch::nn::Linear scale_{nullptr};
  torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr}, norm3_{nullptr};
};
TORCH_MODULE(DecoderLayer);

/// Miniature DETR: conv backbone -> 1x1 projection with group norm -> transformer
/// encoder/decoder over learned queries -> linear classification head and
/// 3-layer regression head.
class DetectorImpl : public torch::nn::Module {
 public:
  explicit DetectorImpl(ModelConfig config, uint64_t init_seed = 0);

  /// `images` is [B, 3, S, S] float. Throws std::invalid_argument on shape
  /// mismatch.
  ModelOutput forward(const torch::Tensor& images);

  const ModelConfig& config() const { return config_; }

  /// Parameters outside `groups` stop receiving gradients.
  void set_trainable(const std::set<ParamGroup>& groups);
  const std::set<ParamGroup>& trainable_groups() const { return trainable_; }
  /// Parameters that currently require gradients.
  std::vector<torch::Tensor> trainable_parameters() const;

  std::map<ParamGroup, int64_t> group_sizes() const;

 private:
  ModelConfig config_;
  std::set<ParamGroup> trainable_ = kAllGroups;
  torch::nn::Sequential backbone_{nullptr};
  torch::nn::Sequential proj_{nullptr};
  torch::nn::ModuleList encoder_{nullptr};
  torch::nn::ModuleList decoder_{nullptr};
  torch::nn::Embedding query_embed_{nullptr};
  torch::nn::Linear ref_point_{nullptr};
  torch::nn::Linear cls_head_{nullptr};
  torch::nn::Sequential reg_head_{nullptr};
  torch::Tensor pos_;
  torch::Tensor grid_;
};
TORCH_MODULE(Detector);

/// Copies every parameter of `src` into `dst` (same configuration).
void copy_parameters(Detector& dst, const Detector& src);

/// Deep copy with every parameter frozen, in evaluation mode.
Detector clone_frozen(const Detector& source);

/// FNV-1a over the raw bytes of a tensor.
uint64_t tensor_hash(const torch::Tensor& t);
/// Hash over the names and contents of every parameter in `groups`.
uint64_t parameter_hash(const Detector& model, const std::set<ParamGroup>& groups = kAllGroups);
/// Per-parameter hashes keyed by name, restricted to `groups`.
std::map<std::string, uint64_t> parameter_hashes(const Detector& model,
                                                 const std::set<ParamGroup>& groups = kAllGroups);

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Detector& model, const std::filesystem::path& path);
/// Loads parameters into `model`. Throws CheckpointVersionError,
/// CheckpointConfigError (stored config differs from the model's) or
/// CheckpointCorruptError.
void load_checkpoint(Detector& model, const std::filesystem::path& path);
/// The configuration stored in a checkpoint.
ModelConfig read_checkpoint_config(const std::filesystem::path& path);

/// Stacks images into a [B, 3, S, S] float tensor.
torch::Tensor images_to_tensor(std::span<const RgbImage* const> images);

}  // namespace ifsd::model
