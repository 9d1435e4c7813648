#include "ifsd/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "ifsd/errors.hpp"

namespace ifsd::model {

using nlohmann::json;

int ModelConfig::feature_size() const {
  int s = image_size;
  for (size_t i = 0; i + 1 < backbone_channels.size(); ++i) s = (s + 1) / 2;
  return s;
}

void ModelConfig::validate() const {
  if (image_size <= 0) throw std::invalid_argument("model: image_size must be positive");
  if (backbone_channels.empty()) throw std::invalid_argument("model: empty backbone");
  if (hidden_dim <= 0 || heads <= 0 || hidden_dim % heads != 0) {
    throw std::invalid_argument("model: hidden_dim must be divisible by heads");
  }
  if (hidden_dim % 8 != 0) throw std::invalid_argument("model: hidden_dim must be divisible by 8");
  for (const int c : backbone_channels) {
    if (c <= 0 || c % 8 != 0) throw std::invalid_argument("model: backbone channels must be multiples of 8");
  }
  if (num_queries <= 0) throw std::invalid_argument("model: num_queries must be positive");
  if (num_base < 1 || num_novel < 0) throw std::invalid_argument("model: need at least one base class");
  if (encoder_layers < 0 || decoder_layers < 1 || ffn_dim <= 0) {
    throw std::invalid_argument("model: invalid layer configuration");
  }
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"image_size", c.image_size},       {"backbone_channels", c.backbone_channels},
           {"hidden_dim", c.hidden_dim},       {"ffn_dim", c.ffn_dim},
           {"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers},
           {"heads", c.heads},                 {"num_queries", c.num_queries},
           {"num_base", c.num_base},           {"num_novel", c.num_novel},
           {"spatial_prior", c.spatial_prior}};
}

void from_json(const json& j, ModelConfig& c) {
  ModelConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.backbone_channels = j.value("backbone_channels", d.backbone_channels);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.ffn_dim = j.value("ffn_dim", d.ffn_dim);
  c.encoder_layers = j.value("encoder_layers", d.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", d.decoder_layers);
  c.heads = j.value("heads", d.heads);
  c.num_queries = j.value("num_queries", d.num_queries);
  c.num_base = j.value("num_base", d.num_base);
  c.num_novel = j.value("num_novel", d.num_novel);
  c.spatial_prior = j.value("spatial_prior", d.spatial_prior);
}

const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kBackbone: return "BACKBONE";
    case ParamGroup::kProjection: return "PROJECTION";
    case ParamGroup::kTransformer: return "TRANSFORMER";
    case ParamGroup::kClsHead: return "CLS_HEAD";
    case ParamGroup::kRegHead: return "REG_HEAD";
  }
  return "?";
}

ParamGroup parse_group(const std::string& name) {
  for (const ParamGroup g : kAllGroups) {
    if (name == group_name(g)) return g;
  }
  throw std::invalid_argument("unknown parameter group " + name);
}

ParamGroup group_of(const std::string& parameter_name) {
  const auto prefix = parameter_name.substr(0, parameter_name.find('.'));
  if (prefix == "backbone") return ParamGroup::kBackbone;
  if (prefix == "proj") return ParamGroup::kProjection;
  if (prefix == "encoder" || prefix == "decoder" || prefix == "query_embed" ||
      prefix == "ref_point") {
    return ParamGroup::kTransformer;
  }
  if (prefix == "cls_head") return ParamGroup::kClsHead;
  if (prefix == "reg_head") return ParamGroup::kRegHead;
  throw std::logic_error("parameter without a group: " + parameter_name);
}

// ---------------------------------------------------------------------------

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int dim, int heads) : heads_(heads) {
  q_proj_ = register_module("q", torch::nn::Linear(dim, dim));
  k_proj_ = register_module("k", torch::nn::Linear(dim, dim));
  v_proj_ = register_module("v", torch::nn::Linear(dim, dim));
  out_proj_ = register_module("out", torch::nn::Linear(dim, dim));
  for (auto* l : {&q_proj_, &k_proj_, &v_proj_, &out_proj_}) {
    torch::nn::init::xavier_uniform_((*l)->weight);
    torch::nn::init::zeros_((*l)->bias);
  }
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& q, const torch::Tensor& k,
                                              const torch::Tensor& v, const torch::Tensor& bias) {
  const int64_t b = q.size(0), lq = q.size(1), lk = k.size(1), d = q.size(2);
  const int64_t dh = d / heads_;
  auto split = [&](const torch::Tensor& x, int64_t len) {
    return x.view({b, len, heads_, dh}).transpose(1, 2);
  };
  const auto qh = split(q_proj_(q), lq);
  const auto kh = split(k_proj_(k), lk);
  const auto vh = split(v_proj_(v), lk);
  auto logits = torch::matmul(qh, kh.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh));
  if (bias.defined()) logits = logits + bias;
  const auto attn = torch::softmax(logits, -1);
  const auto out = torch::matmul(attn, vh).transpose(1, 2).reshape({b, lq, d});
  return out_proj_(out);
}

EncoderLayerImpl::EncoderLayerImpl(int dim, int heads, int ffn) {
  attn_ = register_module("attn", MultiHeadAttention(dim, heads));
  ff1_ = register_module("ff1", torch::nn::Linear(dim, ffn));
  ff2_ = register_module("ff2", torch::nn::Linear(ffn, dim));
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
}

torch::Tensor EncoderLayerImpl::forward(const torch::Tensor& x, const torch::Tensor& pos) {
  const auto qk = x + pos;
  auto y = norm1_(x + attn_(qk, qk, x));
  return norm2_(y + ff2_(torch::relu(ff1_(y))));
}

DecoderLayerImpl::DecoderLayerImpl(int dim, int heads, int ffn) : heads_(heads) {
  self_attn_ = register_module("self_attn", MultiHeadAttention(dim, heads));
  cross_attn_ = register_module("cross_attn", MultiHeadAttention(dim, heads));
  scale_ = register_module("scale", torch::nn::Linear(dim, 2));
  ff1_ = register_module("ff1", torch::nn::Linear(dim, ffn));
  ff2_ = register_module("ff2", torch::nn::Linear(ffn, dim));
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm3_ = register_module("norm3", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
}

torch::Tensor DecoderLayerImpl::forward(const torch::Tensor& tgt, const torch::Tensor& query_pos,
                                        const torch::Tensor& memory, const torch::Tensor& pos,
                                        const torch::Tensor& reference,
                                        const torch::Tensor& grid) {
  const auto q = tgt + query_pos;
  auto t = norm1_(tgt + self_attn_(q, q, tgt));
  torch::Tensor bias;
  if (reference.defined()) {
    // Gaussian log-prior centred on the reference point, widths from content.
    const auto width = torch::sigmoid(scale_(t)) * 0.5 + 0.03;                       // [B, M, 2]
    const auto offset = (grid.unsqueeze(0).unsqueeze(0) - reference.unsqueeze(2)) /
                        width.unsqueeze(2);                                           // [B, M, HW, 2]
    bias = (-0.5 * offset.pow(2).sum(-1)).unsqueeze(1);                               // [B, 1, M, HW]
  }
  t = norm2_(t + cross_attn_(t + query_pos, memory + pos, memory, bias));
  return norm3_(t + ff2_(torch::relu(ff1_(t))));
}

namespace {

// Fixed sinusoidal encoding of an h x w grid, [h*w, d], rows in row-major order.
torch::Tensor sine_position(int d, int h, int w) {
  const int npf = d / 2;
  const double scale = 2.0 * std::numbers::pi;
  auto out = torch::empty({h * w, d}, torch::kFloat32);
  auto acc = out.accessor<float, 2>();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ey = (y + 1.0) / h * scale;
      const double ex = (x + 1.0) / w * scale;
      for (int k = 0; k < npf; ++k) {
        const double dim_t = std::pow(10000.0, 2.0 * (k / 2) / npf);
        const double vy = ey / dim_t;
        const double vx = ex / dim_t;
        acc[y * w + x][k] = static_cast<float>(k % 2 == 0 ? std::sin(vy) : std::cos(vy));
        acc[y * w + x][npf + k] = static_cast<float>(k % 2 == 0 ? std::sin(vx) : std::cos(vx));
      }
    }
  }
  return out;
}

torch::Tensor cell_centres(int h, int w) {
  auto out = torch::empty({h * w, 2}, torch::kFloat32);
  auto acc = out.accessor<float, 2>();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      acc[y * w + x][0] = static_cast<float>((x + 0.5) / w);
      acc[y * w + x][1] = static_cast<float>((y + 0.5) / h);
    }
  }
  return out;
}

torch::Tensor inverse_sigmoid(const torch::Tensor& x) {
  const auto c = x.clamp(1e-5, 1.0 - 1e-5);
  return torch::log(c / (1 - c));
}

}  // namespace

DetectorImpl::DetectorImpl(ModelConfig config, uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  torch::manual_seed(init_seed);
  const int d = config_.hidden_dim;

  backbone_ = torch::nn::Sequential();
  int in = 3;
  for (size_t i = 0; i < config_.backbone_channels.size(); ++i) {
    const int out = config_.backbone_channels[i];
    const int stride = i + 1 < config_.backbone_channels.size() ? 2 : 1;
    backbone_->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1)));
    backbone_->push_back(torch::nn::GroupNorm(torch::nn::GroupNormOptions(8, out)));
    backbone_->push_back(torch::nn::ReLU());
    in = out;
  }
  register_module("backbone", backbone_);
  proj_ = register_module(
      "proj", torch::nn::Sequential(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, d, 1)),
                                    torch::nn::GroupNorm(torch::nn::GroupNormOptions(8, d))));

  encoder_ = register_module("encoder", torch::nn::ModuleList());
  for (int i = 0; i < config_.encoder_layers; ++i) {
    encoder_->push_back(EncoderLayer(d, config_.heads, config_.ffn_dim));
  }
  decoder_ = register_module("decoder", torch::nn::ModuleList());
  for (int i = 0; i < config_.decoder_layers; ++i) {
    decoder_->push_back(DecoderLayer(d, config_.heads, config_.ffn_dim));
  }
  query_embed_ = register_module("query_embed", torch::nn::Embedding(config_.num_queries, 2 * d));
  ref_point_ = register_module("ref_point", torch::nn::Linear(d, 2));

  cls_head_ = register_module("cls_head", torch::nn::Linear(d, config_.class_capacity()));
  torch::NoGradGuard no_grad;
  cls_head_->bias.fill_(-std::log((1.0 - 0.01) / 0.01));

  reg_head_ = register_module(
      "reg_head", torch::nn::Sequential(torch::nn::Linear(d, d), torch::nn::ReLU(),
                                        torch::nn::Linear(d, d), torch::nn::ReLU(),
                                        torch::nn::Linear(d, 4)));
  auto last = reg_head_->ptr<torch::nn::LinearImpl>(4);
  last->weight.zero_();
  last->bias.zero_();

  const int fs = config_.feature_size();
  pos_ = register_buffer("pos", sine_position(d, fs, fs));
  grid_ = register_buffer("grid", cell_centres(fs, fs));
}

ModelOutput DetectorImpl::forward(const torch::Tensor& images) {
  const int s = config_.image_size;
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != s || images.size(3) != s) {
    throw std::invalid_argument("Detector::forward: expected [B, 3, " + std::to_string(s) + ", " +
                                std::to_string(s) + "] images");
  }
  const int64_t b = images.size(0);
  const int64_t d = config_.hidden_dim;

  const auto features = proj_->forward(backbone_->forward(images));  // [B, d, h, w]
  auto memory = features.flatten(2).transpose(1, 2);          // [B, hw, d]
  const auto pos = pos_.unsqueeze(0);
  for (const auto& layer : *encoder_) {
    memory = layer->as<EncoderLayerImpl>()->forward(memory, pos);
  }

  const auto parts = query_embed_->weight.split(d, 1);
  const auto query_pos = parts[0].unsqueeze(0).expand({b, -1, -1});
  auto tgt = parts[1].unsqueeze(0).expand({b, -1, -1});
  const auto reference = torch::sigmoid(ref_point_(query_pos));  // [B, M, 2]
  const torch::Tensor prior = config_.spatial_prior ? reference : torch::Tensor();
  for (const auto& layer : *decoder_) {
    tgt = layer->as<DecoderLayerImpl>()->forward(tgt, query_pos, memory, pos, prior, grid_);
  }

  const auto delta = reg_head_->forward(tgt);
  const auto centre = torch::sigmoid(delta.narrow(-1, 0, 2) + inverse_sigmoid(reference));
  const auto size = torch::sigmoid(delta.narrow(-1, 2, 2));
  return {cls_head_(tgt), torch::cat({centre, size}, -1), features};
}

void DetectorImpl::set_trainable(const std::set<ParamGroup>& groups) {
  trainable_ = groups;
  for (auto& p : named_parameters()) {
    p.value().requires_grad_(groups.contains(group_of(p.key())));
  }
}

std::vector<torch::Tensor> DetectorImpl::trainable_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& p : parameters()) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

std::map<ParamGroup, int64_t> DetectorImpl::group_sizes() const {
  std::map<ParamGroup, int64_t> out;
  for (const ParamGroup g : kAllGroups) out[g] = 0;
  for (const auto& p : named_parameters()) out[group_of(p.key())] += p.value().numel();
  return out;
}

void copy_parameters(Detector& dst, const Detector& src) {
  if (!(dst->config() == src->config())) {
    throw std::invalid_argument("copy_parameters: configurations differ");
  }
  torch::NoGradGuard no_grad;
  auto d = dst->named_parameters();
  for (const auto& p : src->named_parameters()) d[p.key()].copy_(p.value());
}

Detector clone_frozen(const Detector& source) {
  Detector copy(source->config());
  copy_parameters(copy, source);
  copy->set_trainable({});
  copy->eval();
  return copy;
}

// ---------------------------------------------------------------------------
// Hashing

namespace {

constexpr uint64_t kFnvOffset = 1469598103934665603ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

uint64_t fnv1a(const void* data, size_t n, uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

uint64_t tensor_hash_from(const torch::Tensor& t, uint64_t h) {
  const auto c = t.detach().contiguous();
  return fnv1a(c.data_ptr(), c.numel() * c.element_size(), h);
}

}  // namespace

uint64_t tensor_hash(const torch::Tensor& t) { return tensor_hash_from(t, kFnvOffset); }

uint64_t parameter_hash(const Detector& model, const std::set<ParamGroup>& groups) {
  uint64_t h = kFnvOffset;
  for (const auto& p : model->named_parameters()) {
    if (!groups.contains(group_of(p.key()))) continue;
    h = fnv1a(p.key().data(), p.key().size(), h);
    h = tensor_hash_from(p.value(), h);
  }
  return h;
}

std::map<std::string, uint64_t> parameter_hashes(const Detector& model,
                                                 const std::set<ParamGroup>& groups) {
  std::map<std::string, uint64_t> out;
  for (const auto& p : model->named_parameters()) {
    if (groups.contains(group_of(p.key()))) out[p.key()] = tensor_hash(p.value());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (little-endian):
//   "IFSDCKPT" | u32 version | u64 n + n bytes config JSON | u32 tensor count
//   per tensor: u32 n + name | u32 ndim | i64 dims[ndim] | u64 nbytes + float32 data
//   u64 FNV-1a of every preceding byte

namespace {

constexpr char kMagic[8] = {'I', 'F', 'S', 'D', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    bytes(&v, sizeof(T));
  }
  void bytes(const void* p, size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void str(const std::string& s) {
    put<uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, size_t end) : buf_(buf), end_(end) {}
  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  void bytes(void* out, size_t n) {
    if (pos_ + n > end_) throw CheckpointCorruptError("checkpoint truncated");
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::string str(size_t limit) {
    const auto n = get<uint64_t>();
    if (n > limit) throw CheckpointCorruptError("checkpoint string length out of range");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  size_t remaining() const { return end_ - pos_; }

 private:
  const std::vector<char>& buf_;
  size_t end_;
  size_t pos_ = 0;
};

struct RawCheckpoint {
  ModelConfig config;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
};

RawCheckpoint read_raw(const std::filesystem::path& path, bool with_tensors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointCorruptError("cannot open checkpoint " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + 4 + 8) {
    throw CheckpointCorruptError(path.string() + ": file too short");
  }
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointCorruptError(path.string() + ": bad magic");
  }
  uint32_t version = 0;
  std::memcpy(&version, buf.data() + sizeof(kMagic), sizeof(version));
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError(path.string() + ": format version " + std::to_string(version) +
                                 ", expected " + std::to_string(kCheckpointVersion));
  }
  const size_t body = buf.size() - sizeof(uint64_t);
  uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));
  if (fnv1a(buf.data(), body) != stored) {
    throw CheckpointCorruptError(path.string() + ": checksum mismatch");
  }

  Reader r(buf, body);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  r.get<uint32_t>();
  RawCheckpoint raw;
  try {
    raw.config = json::parse(r.str(1 << 20)).get<ModelConfig>();
  } catch (const json::exception& e) {
    throw CheckpointCorruptError(path.string() + ": bad config record: " + e.what());
  }
  if (!with_tensors) return raw;
  const auto count = r.get<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    auto name = r.str(4096);
    const auto ndim = r.get<uint32_t>();
    if (ndim > 8) throw CheckpointCorruptError(path.string() + ": bad tensor rank");
    std::vector<int64_t> dims(ndim);
    int64_t numel = 1;
    for (auto& d : dims) {
      d = r.get<int64_t>();
      if (d < 0) throw CheckpointCorruptError(path.string() + ": negative dimension");
      numel *= d;
    }
    const auto nbytes = r.get<uint64_t>();
    if (nbytes != static_cast<uint64_t>(numel) * sizeof(float) || nbytes > r.remaining()) {
      throw CheckpointCorruptError(path.string() + ": tensor size mismatch for " + name);
    }
    auto t = torch::empty(dims, torch::kFloat32);
    r.bytes(t.data_ptr(), nbytes);
    raw.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) throw CheckpointCorruptError(path.string() + ": trailing bytes");
  return raw;
}

}  // namespace

void save_checkpoint(const Detector& model, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.put<uint32_t>(kCheckpointVersion);
  w.str(json(model->config()).dump());
  const auto params = model->named_parameters();
  w.put<uint32_t>(static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    const auto t = p.value().detach().to(torch::kFloat32).contiguous();
    w.put<uint64_t>(p.key().size());
    w.bytes(p.key().data(), p.key().size());
    w.put<uint32_t>(static_cast<uint32_t>(t.dim()));
    for (const auto d : t.sizes()) w.put<int64_t>(d);
    w.put<uint64_t>(static_cast<uint64_t>(t.numel()) * sizeof(float));
    w.bytes(t.data_ptr(), static_cast<size_t>(t.numel()) * sizeof(float));
  }
  const uint64_t checksum = fnv1a(w.buffer().data(), w.buffer().size());
  w.put<uint64_t>(checksum);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
}

void load_checkpoint(Detector& model, const std::filesystem::path& path) {
  auto raw = read_raw(path, true);
  if (!(raw.config == model->config())) {
    throw CheckpointConfigError(path.string() + ": stored config " + json(raw.config).dump() +
                                " does not match model config " + json(model->config()).dump());
  }
  auto params = model->named_parameters();
  if (raw.tensors.size() != params.size()) {
    throw CheckpointCorruptError(path.string() + ": parameter count mismatch");
  }
  torch::NoGradGuard no_grad;
  for (const auto& [name, t] : raw.tensors) {
    auto* dst = params.find(name);
    if (dst == nullptr || dst->sizes() != t.sizes()) {
      throw CheckpointCorruptError(path.string() + ": unexpected parameter " + name);
    }
    dst->copy_(t);
  }
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
  return read_raw(path, false).config;
}

torch::Tensor images_to_tensor(std::span<const RgbImage* const> images) {
  if (images.empty()) return torch::empty({0, 3, 0, 0});
  const int w = images.front()->width, h = images.front()->height;
  auto out = torch::empty({static_cast<int64_t>(images.size()), 3, h, w}, torch::kFloat32);
  float* dst = out.data_ptr<float>();
  const size_t plane = static_cast<size_t>(w) * h;
  for (size_t b = 0; b < images.size(); ++b) {
    const RgbImage& img = *images[b];
    if (img.width != w || img.height != h) {
      throw std::invalid_argument("images_to_tensor: images differ in size");
    }
    for (size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < 3; ++c) {
        dst[(b * 3 + c) * plane + p] = img.pixels[p * 3 + c];
      }
    }
  }
  return out;
}

}  // namespace ifsd::model
