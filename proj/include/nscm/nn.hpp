#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nscm/dynamics.hpp>
#include <nscm/mcvstem.hpp>

namespace nscm {

// Vector encoding of a positive-definite matrix through its Cholesky-like
// factorization X = Y^T Y with upper-triangular Y: theta holds the rows of Y
// left to right. Diagonal slots store a preimage of the positivity map
// g(t) = sqrt(t^2 + 1e-14), so any raw network output decodes to a matrix
// that is at least barely positive definite and the encoding of a healthy
// factor round-trips exactly.
Vector cholesky_encode(const Matrix& x);
Matrix cholesky_decode(const Vector& theta, int n);

// Largest C in (0, c_max] with 2 mbar C^{2L} + 2 mbar C^{L+1} (1 + C + ... +
// C^{L-1}) <= l_m, the layer-product bound on twice the network norm times
// its second derivative. Bisection to 1e-10; the geometric sum is evaluated
// directly so C = 1 needs no special case. Throws CertificateError when even
// arbitrarily small C fails (l_m = 0 with a nonzero norm cap).
double compute_sn_constant(double m_bar, double l_m, int hidden_layers,
                           double c_max = 10.0);

// Largest singular value by power iteration on the Gram operator,
// deterministic start, relative tolerance 1e-9. A zero matrix returns 0.
double spectral_norm(const Matrix& m);

// Fully-connected tanh network whose effective weights are spectrally
// normalized: hidden layers to norm c_nn, the bias-free output layer to
// sqrt(m_bar / last_width), which caps the output norm at sqrt(m_bar) and the
// input-output slope at sqrt(m_bar) * c_nn^L.
struct SnMlp {
  std::vector<Matrix> raw;        // trainable weights, hidden then output
  std::vector<Vector> bias;       // hidden-layer biases
  std::vector<Matrix> effective;  // normalized weights used by the forward map
  double c_nn = 1.0;
  double m_bar = 1.0;
  int metric_dim = 0;
  MetricMode mode = MetricMode::Basic;
  bool degenerate = false;  // a weight matrix normalized against a zero norm

  int hidden_layers() const { return static_cast<int>(raw.size()) - 1; }
  int input_dim() const { return static_cast<int>(raw.front().cols()); }
  int output_dim() const { return static_cast<int>(raw.back().rows()); }
};

// Recomputes the effective weights from the raw ones; sets degenerate (and
// leaves the layer zero) whenever a raw matrix has zero norm.
void sn_normalize(SnMlp& net);

// Raw network output at a feature vector (state followed by schedule
// parameters).
Vector predict_theta(const SnMlp& net, const Vector& features);

// Decoded metric prediction. The feature vector is the state followed by the
// model's schedule parameters at the evaluation time.
Matrix predict_metric(const SnMlp& net, const Vector& x, const Vector& params);

struct MlpArchitecture {
  int hidden_layers = 3;
  int width = 100;
};

struct TrainingConfig {
  int epochs = 1000;
  int batch = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int decay_every = 200;     // halve the step this often
  double test_fraction = 0.2;
  double early_stop = 0.10;  // relative test error that ends training
  double c_max = 10.0;       // normalization cap handed to compute_sn_constant
  uint64_t seed = 0;
};

enum class TrainStatus { Converged, BudgetExhausted, Diverged };

const char* to_string(TrainStatus status);

// Per-epoch curves plus the final network. On divergence (non-finite loss)
// the last finite weights are kept and status says so; nothing is thrown, the
// caller decides whether a degraded net is acceptable.
struct TrainingResult {
  SnMlp net;
  TrainStatus status = TrainStatus::BudgetExhausted;
  int epochs_run = 0;
  std::vector<double> learning_rate;
  std::vector<double> train_mse;
  std::vector<double> test_mse;
  std::vector<double> test_relative;
  double final_test_mse = 0.0;
  double final_test_relative = 0.0;
};

// Fits the sample set's learning targets (metric for control, normalized
// inverse metric for estimation) in Cholesky encoding, by minibatch SGD with
// momentum and per-step spectral renormalization. The SN constant comes from
// compute_sn_constant at the set's l_m and mbar (the cap alone when the set
// carries no derivative budget); features are the sampled state plus the
// model's schedule parameters at the sample time.
TrainingResult train(const MetricSampleSet& set, const SystemModel& model,
                     const MlpArchitecture& arch, const TrainingConfig& config);

struct LipschitzReport {
  double measured = 0.0;     // largest derivative variation between pairs
  double slope = 0.0;        // largest first-derivative quotient of theta
  double slope_bound = 0.0;  // sqrt(m_bar) * c_nn^L
  double l_m = 0.0;
  int pairs = 0;
  bool pass = false;  // measured <= l_m
};

// Finite-difference check of the metric field's derivative Lipschitz
// constant over sampled state pairs (schedule parameters drawn per pair and
// shared between both endpoints).
LipschitzReport verify_lipschitz(const SnMlp& net, const StateBox& box, double l_m,
                                 uint64_t seed, int num_pairs = 1000);

// Checkpoint: one JSON header line (architecture, normalization constants,
// format version) followed by the raw weights and biases as binary doubles.
// Same net, same bytes.
void save_checkpoint(const SnMlp& net, const std::string& path);
SnMlp load_checkpoint(const std::string& path);

// Epoch curves as CSV (epoch, learning rate, train/test mse, relative test
// error).
void write_training_curves(const TrainingResult& result, const std::string& path);

}  // namespace nscm
