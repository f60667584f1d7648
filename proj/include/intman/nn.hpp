#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace intman {

enum class Activation { Linear, Relu };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& s);

/// Fully connected feed-forward network over column batches.
///
/// Parameters flatten layer by layer: W row-major, then b.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
    Activation act = Activation::Linear;
  };

  /// Activations of every layer for one forward pass, kept for backward.
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input of each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  };

  Mlp() = default;
  /// sizes = {in, h1, ..., out}; one activation per layer.
  Mlp(const std::vector<int>& sizes, const std::vector<Activation>& acts);

  /// 10 -> 4 (ReLU) -> 2 (linear) -> 1 (linear).
  static Mlp policy_net(int features = 10);
  /// (state, action) -> 64 -> 64 -> 1, ReLU hidden layers.
  static Mlp critic_net(int input_dim, int hidden = 64);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  void init(std::mt19937_64& rng);

  int input_dim() const;
  int output_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Columns are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& in, Cache* cache = nullptr) const;
  double forward_scalar(const Eigen::VectorXd& in) const;

  /// Backpropagates dL/d(output) through a cached pass. Adds the parameter
  /// gradient into `grad` (flat, may be null) and returns dL/d(input).
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                           Eigen::VectorXd* grad) const;

  std::size_t num_params() const;
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);

  /// Versioned text format; doubles at 17 significant digits so a
  /// save/load round trip is exact.
  void save(std::ostream& os) const;
  static Mlp load(std::istream& is);
  void save_file(const std::string& path) const;
  static Mlp load_file(const std::string& path);

 private:
  std::vector<Layer> layers_;
};

inline constexpr int kNetFormatVersion = 1;

}  // namespace intman
