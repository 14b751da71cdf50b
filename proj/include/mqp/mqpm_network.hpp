#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mqp/flow_io.hpp"
#include "mqp/grid.hpp"
#include "mqp/motion_quality.hpp"
#include "mqp/nn/checkpoint.hpp"
#include "mqp/nn/layers.hpp"

namespace mqp::mqpm {

/// Architecture of the localization branch, shared by the motion quality
/// network and the refinement model.
///
/// The encoder is a VGG-style stack of stages; every stage but the first
/// starts with a 2×2 max pool, so inputs must be divisible by
/// 2^(stages - 1). The last three stages feed the attention blocks and the
/// decoder. Presets: "vgg16" (64-128-256-512-512 channels, 2-2-3-3-3 convs)
/// and "vgg-micro" (8-16-32-32, one conv each) for desk-scale runs; any other
/// name uses encoder_channels / encoder_convs as given.
struct NetworkConfig {
  int input_height = 256;
  int input_width = 256;
  std::string encoder = "vgg16";
  std::vector<int> encoder_channels;
  std::vector<int> encoder_convs;
  std::vector<int> dilation_rates = {2, 4, 6, 8};
  int attention_width = 32;
  std::vector<int> decoder_channels = {256, 128, 64};
  // optional checkpoint providing "encoder.*" parameters
  std::string encoder_weights;

  /// Fills preset channel lists and throws ConfigError on invalid settings.
  NetworkConfig resolved() const;
  int stride_product() const;
};

struct MqpmConfig {
  NetworkConfig net;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 10;
  bool hflip_augment = true;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
void to_json(nlohmann::json& j, const MqpmConfig& c);
void from_json(const nlohmann::json& j, MqpmConfig& c);

/// Parallel dilated 3×3 convolutions (one per rate, attention_width wide),
/// concatenated and fused by a 1×1 conv into a single-channel sigmoid gate.
/// Output = features · gate + features.
class DilatedAttention {
 public:
  struct Cache {
    nn::Tensor input;
    std::vector<nn::Conv2d::Cache> branch;
    std::vector<nn::Tensor> branch_out;
    nn::Conv2d::Cache fuse;
    nn::Tensor gate;
  };

  DilatedAttention() = default;
  DilatedAttention(const std::string& name, int channels, const std::vector<int>& rates, int width);

  nn::Tensor forward(const nn::Tensor& x, Cache* cache = nullptr) const;
  nn::Tensor backward(const nn::Tensor& grad_out, const Cache& cache);
  /// The single-channel gate in [0,1] for the given features.
  nn::Tensor attention_map(const nn::Tensor& x) const;
  /// x · gate + x, broadcasting the one-channel gate over all channels.
  static nn::Tensor apply_gate(const nn::Tensor& x, const nn::Tensor& gate);

  void init(std::mt19937_64& rng);
  std::vector<nn::Param*> params();
  nn::Conv2d& fuse() { return fuse_; }

 private:
  std::vector<nn::Conv2d> branches_;
  nn::Conv2d fuse_;
};

/// Encoder + attended skips + U-Net decoder + sigmoid head.
class LocalizationNet {
 public:
  struct Cache {
    struct Stage {
      std::vector<int> argmax;
      int in_h = 0, in_w = 0;
      std::vector<nn::Conv2d::Cache> conv;
      std::vector<nn::Tensor> out;
    };
    std::vector<Stage> stages;
    std::array<DilatedAttention::Cache, 3> attention;
    std::array<nn::Conv2d::Cache, 3> decoder;
    std::array<nn::Tensor, 3> decoder_out;
    nn::Conv2d::Cache head;
    nn::Tensor prob;
  };

  struct Output {
    nn::Tensor prob;      // 1×H×W saliency in [0,1]
    nn::Tensor features;  // last decoder stage
  };

  LocalizationNet() = default;
  LocalizationNet(const NetworkConfig& config, std::uint64_t seed);

  Output forward(const nn::Tensor& x, Cache* cache = nullptr) const;
  /// grad_features may be null when only the saliency head is supervised.
  void backward(const nn::Tensor& grad_prob, const nn::Tensor* grad_features, Cache& cache);

  std::vector<nn::Param*> params();
  const NetworkConfig& config() const { return config_; }
  int feature_channels() const { return config_.decoder_channels.back(); }
  DilatedAttention& attention(int i) { return attention_[i]; }

 private:
  NetworkConfig config_;
  std::vector<std::vector<nn::Conv2d>> stages_;
  std::array<DilatedAttention, 3> attention_;
  std::array<nn::Conv2d, 3> decoder_;
  nn::Conv2d head_;
};

struct MqpmOutput {
  SaliencyMap motion_saliency;
  double quality_confidence = 0.0;
};

/// Two-branch motion quality network: localization branch plus a
/// classification branch (global average pool of the last decoder stage ->
/// linear -> sigmoid).
class MqpmModel {
 public:
  struct Cache {
    LocalizationNet::Cache loc;
    nn::Linear::Cache fc;
    double q = 0.0;
  };

  MqpmModel() = default;
  explicit MqpmModel(const MqpmConfig& config);

  struct Forward {
    nn::Tensor prob;
    double q = 0.0;
  };
  Forward forward(const nn::Tensor& x, Cache* cache = nullptr) const;
  void backward(const nn::Tensor& grad_prob, double grad_q, Cache& cache);

  std::vector<nn::Param*> params();
  LocalizationNet& localization() { return loc_; }
  nn::Linear& classifier() { return fc_; }
  const MqpmConfig& config() const { return config_; }

  nn::Checkpoint to_checkpoint() const;
  /// Throws IntegrationError when kind, names or shapes disagree.
  static MqpmModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  MqpmConfig config_;
  LocalizationNet loc_;
  nn::Linear fc_;
};

/// Builds the network; throws ConfigError for invalid configs (e.g. input
/// size not divisible by the encoder stride product).
MqpmModel build_mqpm(const MqpmConfig& config);

// ---- losses (mean reduction, probabilities clamped to [1e-7, 1 - 1e-7])

inline constexpr double kLogEps = 1e-7;

double bce_loss(std::span<const SaliencyMap> ms, std::span<const BinaryMask> gt);
/// d bce_loss / d ms for every pixel; zero where the clamp is active.
std::vector<SaliencyMap> bce_loss_grad(std::span<const SaliencyMap> ms, std::span<const BinaryMask> gt);
double cls_loss(std::span<const double> q, std::span<const int> labels);
std::vector<double> cls_loss_grad(std::span<const double> q, std::span<const int> labels);
double total_loss(double bce, double cls);

/// Sum of per-pixel BCE terms; writes scale · dL/dp into grad when given.
/// Targets may be soft.
double bce_sum(std::span<const double> prob, std::span<const double> target, std::span<double> grad,
               double scale);

// ---- data preparation

struct PreparedSample {
  nn::Tensor input;   // C×H×W, centered at zero
  nn::Tensor target;  // 1×H×W
};

/// Resizes to the network input, optionally mirrors input and target
/// together.
PreparedSample prepare_sample(const RgbImage& image, const SaliencyMap& target, bool flip,
                              const NetworkConfig& net);
nn::Tensor prepare_input(const RgbImage& image, const NetworkConfig& net);

// ---- training and inference

struct EpochLoss {
  int epoch = 0;  // 0 is the evaluation before the first update
  double bce = 0.0;
  double cls = 0.0;
  double total = 0.0;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<EpochLoss> log;
  std::vector<std::string> warnings;
  std::set<std::string> visited;
};

/// Adam on bce + cls with horizontal-flip augmentation. Deterministic for a
/// fixed seed. Throws InvalidInput on an empty training set.
TrainResult train_mqpm(const std::vector<quality::MqpmSample>& trainset, const MqpmConfig& config);

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLoss>& log);

struct QualityPrediction {
  MqpmOutput output;
  bool decision = false;  // Q >= 0.5
};

/// Runs the network on a flow rendering; the motion map is resized back to
/// the rendering's size.
QualityPrediction predict_quality(const flow::FlowRgb& flow_rgb, const MqpmModel& model);

// helpers shared with the refinement trainer
std::vector<nn::ParamBlob> export_params(const std::vector<nn::Param*>& params);
void import_params(const std::vector<nn::Param*>& params, const std::vector<nn::ParamBlob>& blobs,
                   const std::string& prefix_filter = "");
void load_encoder_weights(LocalizationNet& net, const std::string& path);

}  // namespace mqp::mqpm
