#include <nscm/nn.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <json.hpp>

#include <nscm/csv.hpp>
#include <nscm/rng.hpp>

namespace nscm {

namespace {

// Offset of the positivity map applied to diagonal slots; decoded diagonals
// are at least this large.
constexpr double kDiagEps = 1e-7;

// Smallest normalization constant worth certifying; below this the hidden
// layers attenuate the input so strongly that the network is constant in
// practice, so the derivative budget is reported as unsatisfiable.
constexpr double kMinSnConstant = 0.02;

int theta_dim(int n) { return n * (n + 1) / 2; }

bool finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

Vector cholesky_encode(const Matrix& x) {
  if (x.rows() != x.cols() || x.rows() == 0)
    throw EvaluationError("cholesky_encode needs a square matrix");
  const int n = static_cast<int>(x.rows());
  Eigen::LLT<Matrix> llt(0.5 * (x + x.transpose()));
  if (llt.info() != Eigen::Success)
    throw FactorizationError("cholesky_encode: matrix is not positive definite");
  Matrix y = llt.matrixU();
  Vector theta(theta_dim(n));
  int k = 0;
  for (int r = 0; r < n; ++r) {
    const double d = y(r, r);
    theta[k++] = std::sqrt(std::max(d * d - kDiagEps * kDiagEps, 0.0));
    for (int c = r + 1; c < n; ++c) theta[k++] = y(r, c);
  }
  return theta;
}

Matrix cholesky_decode(const Vector& theta, int n) {
  if (n <= 0 || theta.size() != theta_dim(n))
    throw ConfigError("cholesky_decode: theta length does not match dimension");
  Matrix y = Matrix::Zero(n, n);
  int k = 0;
  for (int r = 0; r < n; ++r) {
    const double t = theta[k++];
    y(r, r) = std::sqrt(t * t + kDiagEps * kDiagEps);
    for (int c = r + 1; c < n; ++c) y(r, c) = theta[k++];
  }
  return y.transpose() * y;
}

double compute_sn_constant(double m_bar, double l_m, int hidden_layers, double c_max) {
  if (m_bar <= 0) throw ConfigError("compute_sn_constant: output norm cap must be > 0");
  if (hidden_layers < 1) throw ConfigError("compute_sn_constant: need at least one hidden layer");
  if (c_max <= 0) throw ConfigError("compute_sn_constant: c_max must be > 0");
  const int layers = hidden_layers;
  // 2 mbar C^{2L} + 2 mbar C^{L+1} (1 + C + ... + C^{L-1}), increasing in C.
  const auto budget = [&](double c) {
    double gsum = 0.0, pw = 1.0;
    for (int k = 0; k < layers; ++k) {
      gsum += pw;
      pw *= c;
    }
    return 2.0 * m_bar * std::pow(c, 2 * layers) +
           2.0 * m_bar * std::pow(c, layers + 1) * gsum;
  };
  if (budget(c_max) <= l_m) return c_max;
  double lo = 0.0, hi = c_max;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (budget(mid) <= l_m ? lo : hi) = mid;
  }
  if (lo <= kMinSnConstant)
    throw CertificateError(
        "no usable spectral normalization constant meets the derivative "
        "budget " +
        std::to_string(l_m) + " at output cap " + std::to_string(m_bar));
  return lo;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  const Matrix b = m / scale;
  const int n = static_cast<int>(b.cols());
  Vector v = Vector::LinSpaced(n, 1.0, 2.0).normalized();
  double sigma = 0.0, prev = -1.0;
  for (int it = 0; it < 10000; ++it) {
    Vector u = b * v;
    sigma = u.norm();
    if (sigma == 0.0) {
      v = Vector::Unit(n, it % n);
      prev = -1.0;
      continue;
    }
    if (std::abs(sigma - prev) <= 1e-9 * sigma) break;
    prev = sigma;
    Vector w = b.transpose() * u;
    const double wn = w.norm();
    if (wn == 0.0) break;
    v = w / wn;
  }
  return sigma * scale;
}

void sn_normalize(SnMlp& net) {
  const int last = static_cast<int>(net.raw.size()) - 1;
  net.effective.resize(net.raw.size());
  net.degenerate = false;
  for (int l = 0; l <= last; ++l) {
    const double sigma = spectral_norm(net.raw[l]);
    if (sigma == 0.0) {
      net.effective[l] = net.raw[l];
      net.degenerate = true;
      continue;
    }
    if (l < last) {
      net.effective[l] = (net.c_nn / sigma) * net.raw[l];
    } else {
      const double units = static_cast<double>(net.raw[l].cols());
      net.effective[l] = (std::sqrt(net.m_bar) / (sigma * std::sqrt(units))) * net.raw[l];
    }
  }
}

namespace {

// Forward pass over a batch stored as columns; returns the activation of
// every layer (index 0 is the input) plus the output.
Matrix forward_batch(const SnMlp& net, const Matrix& features, std::vector<Matrix>* acts) {
  const int hidden = net.hidden_layers();
  if (acts) {
    acts->clear();
    acts->push_back(features);
  }
  Matrix a = features;
  for (int l = 0; l < hidden; ++l) {
    Matrix z = net.effective[l] * a;
    z.colwise() += net.bias[l];
    a = z.array().tanh().matrix();
    if (acts) acts->push_back(a);
  }
  return net.effective[hidden] * a;
}

double mse_of(const SnMlp& net, const Matrix& features, const Matrix& targets) {
  if (features.cols() == 0) return 0.0;
  const Matrix out = forward_batch(net, features, nullptr);
  return (out - targets).squaredNorm() / static_cast<double>(features.cols());
}

double relative_error(const SnMlp& net, const Matrix& features, const Matrix& targets) {
  if (features.cols() == 0) return 0.0;
  const Matrix out = forward_batch(net, features, nullptr);
  const double denom = targets.squaredNorm();
  const double num = (out - targets).squaredNorm();
  if (denom == 0.0) return std::sqrt(num / static_cast<double>(features.cols()));
  return std::sqrt(num / denom);
}

}  // namespace

Vector predict_theta(const SnMlp& net, const Vector& features) {
  if (net.raw.empty() || net.effective.size() != net.raw.size())
    throw EvaluationError("network has no normalized weights");
  if (features.size() != net.input_dim())
    throw EvaluationError("feature vector does not match the network input");
  return forward_batch(net, features, nullptr).col(0);
}

Matrix predict_metric(const SnMlp& net, const Vector& x, const Vector& params) {
  Vector f(x.size() + params.size());
  f << x, params;
  return cholesky_decode(predict_theta(net, f), net.metric_dim);
}

const char* to_string(TrainStatus status) {
  switch (status) {
    case TrainStatus::Converged: return "converged";
    case TrainStatus::BudgetExhausted: return "budget_exhausted";
    case TrainStatus::Diverged: return "diverged";
  }
  return "?";
}

TrainingResult train(const MetricSampleSet& set, const SystemModel& model,
                     const MlpArchitecture& arch, const TrainingConfig& config) {
  if (set.samples.empty()) throw ConfigError("train: sample set is empty");
  if (arch.hidden_layers < 1 || arch.width < 1)
    throw ConfigError("train: architecture needs hidden layers and width >= 1");
  if (config.epochs < 1 || config.batch < 1)
    throw ConfigError("train: epochs and batch must be >= 1");
  if (config.learning_rate <= 0) throw ConfigError("train: learning rate must be > 0");
  if (config.test_fraction < 0 || config.test_fraction >= 1)
    throw ConfigError("train: test fraction must lie in [0, 1)");
  if (set.mbar <= 0) throw ConfigError("train: sample set has no output norm cap");

  const int total = static_cast<int>(set.samples.size());
  const int n = static_cast<int>(set.samples.front().wbar.rows());
  const int out_dim = theta_dim(n);
  const Vector probe_params = model.param_features(set.samples.front().t);
  const int in_dim = static_cast<int>(set.samples.front().x.size() + probe_params.size());

  Matrix features(in_dim, total);
  Matrix targets(out_dim, total);
  for (int i = 0; i < total; ++i) {
    const MetricSample& s = set.samples[i];
    const Vector p = model.param_features(s.t);
    if (s.x.size() + p.size() != in_dim)
      throw ConfigError("train: inconsistent feature dimensions across samples");
    features.col(i).head(s.x.size()) = s.x;
    features.col(i).tail(p.size()) = p;
    Matrix target = s.metric;
    if (set.mode == MetricMode::Estimation) {
      target = s.metric.inverse();
      target = 0.5 * (target + target.transpose()).eval();
    }
    targets.col(i) = cholesky_encode(target);
  }

  SnMlp net;
  net.m_bar = set.mbar;
  net.metric_dim = n;
  net.mode = set.mode;
  net.c_nn = set.l_m > 0
                 ? compute_sn_constant(set.mbar, set.l_m, arch.hidden_layers, config.c_max)
                 : config.c_max;

  std::vector<int> widths;
  widths.push_back(in_dim);
  for (int l = 0; l < arch.hidden_layers; ++l) widths.push_back(arch.width);
  widths.push_back(out_dim);

  auto init_engine = substream(config.seed, "nn-init");
  std::normal_distribution<double> unit;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    Matrix w(widths[l + 1], widths[l]);
    const double s = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = s * unit(init_engine);
    net.raw.push_back(w);
    if (l + 2 < widths.size()) net.bias.push_back(Vector::Zero(widths[l + 1]));
  }
  sn_normalize(net);

  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  auto split_engine = substream(config.seed, "nn-split");
  std::shuffle(order.begin(), order.end(), split_engine);
  int test_count = total >= 2 ? static_cast<int>(std::lround(config.test_fraction * total)) : 0;
  test_count = std::min(test_count, total - 1);
  const int train_count = total - test_count;

  Matrix train_f(in_dim, train_count), train_t(out_dim, train_count);
  Matrix test_f(in_dim, test_count), test_t(out_dim, test_count);
  for (int i = 0; i < train_count; ++i) {
    train_f.col(i) = features.col(order[i]);
    train_t.col(i) = targets.col(order[i]);
  }
  for (int i = 0; i < test_count; ++i) {
    test_f.col(i) = features.col(order[train_count + i]);
    test_t.col(i) = targets.col(order[train_count + i]);
  }

  const int hidden = arch.hidden_layers;
  std::vector<Matrix> vel_w;
  std::vector<Vector> vel_b;
  for (const Matrix& w : net.raw) vel_w.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const Vector& b : net.bias) vel_b.push_back(Vector::Zero(b.size()));

  // Gradient scale of each raw matrix given its effective counterpart; the
  // spectral norm is held fixed within a step.
  const auto layer_scale = [&](int l) {
    const double sigma = spectral_norm(net.raw[l]);
    if (sigma == 0.0) return 0.0;
    if (l < hidden) return net.c_nn / sigma;
    return std::sqrt(net.m_bar) / (sigma * std::sqrt(static_cast<double>(net.raw[l].cols())));
  };

  TrainingResult result;
  result.status = TrainStatus::BudgetExhausted;

  SnMlp last_good = net;
  auto batch_engine = substream(config.seed, "nn-batch");
  std::vector<int> train_order(train_count);
  std::iota(train_order.begin(), train_order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr =
        config.learning_rate * std::pow(0.5, epoch / std::max(1, config.decay_every));
    std::shuffle(train_order.begin(), train_order.end(), batch_engine);
    bool blew_up = false;

    for (int start = 0; start < train_count && !blew_up; start += config.batch) {
      const int count = std::min(config.batch, train_count - start);
      Matrix bf(in_dim, count), bt(out_dim, count);
      for (int i = 0; i < count; ++i) {
        bf.col(i) = train_f.col(train_order[start + i]);
        bt.col(i) = train_t.col(train_order[start + i]);
      }

      std::vector<Matrix> acts;
      const Matrix out = forward_batch(net, bf, &acts);
      const Matrix resid = out - bt;
      if (!finite(resid)) {
        blew_up = true;
        break;
      }

      std::vector<double> scales(net.raw.size());
      for (size_t l = 0; l < net.raw.size(); ++l) scales[l] = layer_scale(static_cast<int>(l));

      Matrix delta = (2.0 / count) * resid;
      Matrix grad = delta * acts[hidden].transpose();
      vel_w[hidden] = config.momentum * vel_w[hidden] - lr * scales[hidden] * grad;
      net.raw[hidden] += vel_w[hidden];
      delta = ((net.effective[hidden].transpose() * delta).array() *
               (1.0 - acts[hidden].array().square()))
                  .matrix();
      for (int l = hidden - 1; l >= 0; --l) {
        grad = delta * acts[l].transpose();
        vel_w[l] = config.momentum * vel_w[l] - lr * scales[l] * grad;
        net.raw[l] += vel_w[l];
        vel_b[l] = config.momentum * vel_b[l] - lr * delta.rowwise().sum();
        net.bias[l] += vel_b[l];
        if (l > 0)
          delta = ((net.effective[l].transpose() * delta).array() *
                   (1.0 - acts[l].array().square()))
                      .matrix();
      }

      for (const Matrix& w : net.raw)
        if (!finite(w)) blew_up = true;
      if (!blew_up) sn_normalize(net);
    }

    const double train_mse = blew_up ? std::numeric_limits<double>::quiet_NaN()
                                     : mse_of(net, train_f, train_t);
    const double test_mse = blew_up ? train_mse : mse_of(net, test_f, test_t);
    const double test_rel = blew_up ? train_mse : relative_error(net, test_f, test_t);
    if (blew_up || !std::isfinite(train_mse) || !std::isfinite(test_mse)) {
      net = last_good;
      result.status = TrainStatus::Diverged;
      break;
    }

    result.learning_rate.push_back(lr);
    result.train_mse.push_back(train_mse);
    result.test_mse.push_back(test_mse);
    result.test_relative.push_back(test_rel);
    result.epochs_run = epoch + 1;
    last_good = net;

    if (test_count > 0 && test_rel <= config.early_stop) {
      result.status = TrainStatus::Converged;
      break;
    }
  }

  result.net = net;
  if (!result.train_mse.empty()) {
    result.final_test_mse = result.test_mse.back();
    result.final_test_relative = result.test_relative.back();
  }
  return result;
}

LipschitzReport verify_lipschitz(const SnMlp& net, const StateBox& box, double l_m,
                                 uint64_t seed, int num_pairs) {
  if (num_pairs < 1) throw ConfigError("verify_lipschitz: need at least one pair");
  const int sdim = box.dim();
  if (sdim + box.param_dim() != net.input_dim())
    throw ConfigError("verify_lipschitz: box dimensions do not match the network input");

  GaussianStream rng(seed, "lipschitz-pairs");
  LipschitzReport report;
  report.l_m = l_m;
  report.pairs = num_pairs;
  report.slope_bound = std::sqrt(net.m_bar) * std::pow(net.c_nn, net.hidden_layers());

  const auto d_metric = [&](const Vector& x, const Vector& p, int axis) {
    const double h = 1e-5 * (1.0 + std::abs(x[axis]));
    Vector xp = x, xm = x;
    xp[axis] += h;
    xm[axis] -= h;
    return ((predict_metric(net, xp, p) - predict_metric(net, xm, p)) / (2.0 * h)).eval();
  };

  for (int k = 0; k < num_pairs; ++k) {
    const Vector a = box.sample_state(rng);
    const Vector b = box.sample_state(rng);
    const Vector p = box.sample_params(rng);
    const double gap = (a - b).norm();
    if (gap < 1e-12) continue;

    Vector fa(sdim + p.size()), fb(sdim + p.size());
    fa << a, p;
    fb << b, p;
    report.slope = std::max(
        report.slope, (predict_theta(net, fa) - predict_theta(net, fb)).norm() / gap);

    for (int i = 0; i < sdim; ++i) {
      const Matrix diff = d_metric(a, p, i) - d_metric(b, p, i);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (diff + diff.transpose()));
      const double var = eig.eigenvalues().cwiseAbs().maxCoeff();
      report.measured = std::max(report.measured, var / gap);
    }
  }
  report.pass = report.measured <= l_m;
  return report;
}

void save_checkpoint(const SnMlp& net, const std::string& path) {
  if (net.raw.empty()) throw ConfigError("save_checkpoint: empty network");
  nlohmann::json header;
  header["format"] = "nscm-net";
  header["version"] = 1;
  std::vector<int> widths;
  widths.push_back(net.input_dim());
  for (const Matrix& w : net.raw) widths.push_back(static_cast<int>(w.rows()));
  header["widths"] = widths;
  header["c_nn"] = net.c_nn;
  header["m_bar"] = net.m_bar;
  header["metric_dim"] = net.metric_dim;
  header["mode"] = to_string(net.mode);
  header["degenerate"] = net.degenerate;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path);
  out << header.dump() << '\n';
  const auto dump = [&](const double* data, size_t count) {
    out.write(reinterpret_cast<const char*>(data), count * sizeof(double));
  };
  for (const Matrix& w : net.raw) dump(w.data(), static_cast<size_t>(w.size()));
  for (const Vector& b : net.bias) dump(b.data(), static_cast<size_t>(b.size()));
  if (!out) throw Error("failed writing checkpoint: " + path);
}

SnMlp load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("checkpoint has no header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint header: " + std::string(e.what()));
  }
  try {
    if (header.at("format").get<std::string>() != "nscm-net")
      throw ConfigError("not a network checkpoint: " + path);
    if (header.at("version").get<int>() != 1)
      throw ConfigError("unsupported checkpoint version in " + path);
    SnMlp net;
    const auto widths = header.at("widths").get<std::vector<int>>();
    if (widths.size() < 3) throw ConfigError("checkpoint needs at least one hidden layer");
    net.c_nn = header.at("c_nn").get<double>();
    net.m_bar = header.at("m_bar").get<double>();
    net.metric_dim = header.at("metric_dim").get<int>();
    net.mode = metric_mode_from_name(header.at("mode").get<std::string>());
    const auto slurp = [&](double* data, size_t count) {
      in.read(reinterpret_cast<char*>(data), count * sizeof(double));
      if (!in) throw Error("checkpoint is truncated: " + path);
    };
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
      Matrix w(widths[l + 1], widths[l]);
      slurp(w.data(), static_cast<size_t>(w.size()));
      net.raw.push_back(w);
      if (l + 2 < widths.size()) net.bias.push_back(Vector::Zero(widths[l + 1]));
    }
    for (Vector& b : net.bias) slurp(b.data(), static_cast<size_t>(b.size()));
    sn_normalize(net);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint header: " + std::string(e.what()));
  }
}

void write_training_curves(const TrainingResult& result, const std::string& path) {
  CsvWriter csv(path);
  csv.header({"epoch", "learning_rate", "train_mse", "test_mse", "test_relative"});
  for (size_t i = 0; i < result.train_mse.size(); ++i)
    csv.row({static_cast<double>(i), result.learning_rate[i], result.train_mse[i],
             result.test_mse[i], result.test_relative[i]});
}

}  // namespace nscm
