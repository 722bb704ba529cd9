#include "raid/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "raid/rng.hpp"

namespace raid::rec {

namespace {

constexpr double kScoreFloor = 1e-7;
constexpr double kScoreCeil = 1.0 - 1e-7;

void check_sample(const EmbeddingModel& model, const Interaction& s) {
  if (s.user < 0 || s.user >= model.num_users())
    throw std::invalid_argument("interaction references an unknown user");
  if (s.item < 0 || s.item >= model.num_items())
    throw std::invalid_argument("interaction references an unknown item");
  if (s.rating != 0.0 && s.rating != 1.0)
    throw std::invalid_argument("interaction rating must be 0 or 1");
}

// Shortest round-trip decimal form; keeps checkpoints byte-stable.
void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

EmbeddingModel init_model(int users, int items, int dim, std::uint64_t seed) {
  if (users <= 0 || items <= 0 || dim <= 0)
    throw std::invalid_argument("init_model: sizes must be positive");
  rng::Engine eng(rng::derive(seed, 0x1347));
  EmbeddingModel m;
  m.user_vecs.resize(users, dim);
  m.item_vecs.resize(items, dim);
  for (int u = 0; u < users; ++u)
    for (int k = 0; k < dim; ++k) m.user_vecs(u, k) = 0.01 * rng::gaussian(eng);
  for (int v = 0; v < items; ++v)
    for (int k = 0; k < dim; ++k) m.item_vecs(v, k) = 0.01 * rng::gaussian(eng);
  return m;
}

double predict_score(const EmbeddingModel& model, int user, int item) {
  if (user < 0 || user >= model.num_users() || item < 0 || item >= model.num_items())
    throw std::invalid_argument("predict_score: index out of range");
  const double z = model.user_vecs.row(user).dot(model.item_vecs.row(item));
  const double s = 1.0 / (1.0 + std::exp(-z));
  return std::clamp(s, kScoreFloor, kScoreCeil);
}

double ce_loss(const EmbeddingModel& model, const std::vector<Interaction>& batch) {
  if (batch.empty()) throw std::invalid_argument("ce_loss: empty batch");
  double acc = 0.0;
  for (const auto& s : batch) {
    check_sample(model, s);
    const double p = predict_score(model, s.user, s.item);
    acc += s.rating * std::log(p) + (1.0 - s.rating) * std::log(1.0 - p);
  }
  return -acc / static_cast<double>(batch.size());
}

CeGradient ce_gradient(const EmbeddingModel& model, const std::vector<Interaction>& batch) {
  if (batch.empty()) throw std::invalid_argument("ce_gradient: empty batch");
  CeGradient g;
  g.user_vecs = Eigen::MatrixXd::Zero(model.num_users(), model.dim());
  g.item_vecs = Eigen::MatrixXd::Zero(model.num_items(), model.dim());
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    check_sample(model, s);
    const double err = (predict_score(model, s.user, s.item) - s.rating) * inv;
    g.user_vecs.row(s.user) += err * model.item_vecs.row(s.item);
    g.item_vecs.row(s.item) += err * model.user_vecs.row(s.user);
  }
  return g;
}

NegativeSamples negative_sample(const std::vector<Interaction>& positives, int num_items,
                                int ratio, std::uint64_t seed) {
  if (num_items <= 0) throw std::invalid_argument("negative_sample: num_items must be positive");
  if (ratio <= 0) throw std::invalid_argument("negative_sample: ratio must be positive");

  int max_user = -1;
  for (const auto& s : positives) {
    if (s.user < 0 || s.item < 0 || s.item >= num_items)
      throw std::invalid_argument("negative_sample: sample out of range");
    max_user = std::max(max_user, s.user);
  }
  std::vector<std::vector<int>> seen(max_user + 1);
  for (const auto& s : positives) seen[s.user].push_back(s.item);
  for (auto& v : seen) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }

  rng::Engine eng(rng::derive(seed, 0x4e47));
  NegativeSamples out;
  out.negatives.reserve(positives.size() * static_cast<std::size_t>(ratio));
  std::vector<char> user_warned(max_user + 1, 0);
  std::vector<int> draw;
  for (const auto& s : positives) {
    const auto& mine = seen[s.user];
    const int avail = num_items - static_cast<int>(mine.size());
    if (avail <= 0) {
      if (!user_warned[s.user]) {
        user_warned[s.user] = 1;
        ++out.users_skipped;
      }
      continue;
    }
    const int want = std::min(ratio, avail);
    draw.clear();
    if (avail <= 2 * want) {
      // Few candidates: materialise the complement and take a random prefix.
      std::vector<int> pool;
      pool.reserve(avail);
      std::size_t k = 0;
      for (int item = 0; item < num_items; ++item) {
        while (k < mine.size() && mine[k] < item) ++k;
        if (k < mine.size() && mine[k] == item) continue;
        pool.push_back(item);
      }
      rng::shuffle(pool, eng);
      draw.assign(pool.begin(), pool.begin() + want);
    } else {
      while (static_cast<int>(draw.size()) < want) {
        const int cand = static_cast<int>(rng::uniform_int(eng, num_items));
        if (std::binary_search(mine.begin(), mine.end(), cand)) continue;
        if (std::find(draw.begin(), draw.end(), cand) != draw.end()) continue;
        draw.push_back(cand);
      }
    }
    for (const int item : draw) out.negatives.push_back({s.user, item, 0.0});
  }
  return out;
}

EmbeddingModel perturb_users(const EmbeddingModel& model, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("perturb_users: sigma must be nonnegative");
  EmbeddingModel out = model;
  if (sigma == 0.0) return out;
  rng::Engine eng(rng::derive(seed, 0xd9));
  for (int u = 0; u < out.num_users(); ++u)
    for (int k = 0; k < out.dim(); ++k) out.user_vecs(u, k) += sigma * rng::gaussian(eng);
  return out;
}

void save_model(const EmbeddingModel& model, const std::string& path,
                const std::string& config_json) {
  if (config_json.find('\n') != std::string::npos)
    throw std::invalid_argument("save_model: config annotation must be a single line");
  std::string out;
  out.reserve(static_cast<std::size_t>(model.user_vecs.size() + model.item_vecs.size()) * 20);
  out += "embeddings-v1\n";
  out += "config " + config_json + "\n";
  out += std::to_string(model.num_users()) + " " + std::to_string(model.num_items()) + " " +
         std::to_string(model.dim()) + "\n";
  const auto dump = [&out](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out += ' ';
        append_double(out, m(r, c));
      }
      out += '\n';
    }
  };
  dump(model.user_vecs);
  dump(model.item_vecs);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_model: cannot open " + path);
  f << out;
  if (!f) throw std::runtime_error("save_model: write failed for " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_model: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "embeddings-v1")
    throw std::runtime_error("load_model: unsupported checkpoint format in " + path);
  LoadedModel out;
  if (!std::getline(f, line) || line.rfind("config ", 0) != 0)
    throw std::runtime_error("load_model: missing config line in " + path);
  out.config_json = line.substr(7);
  int users = 0, items = 0, dim = 0;
  if (!(f >> users >> items >> dim) || users <= 0 || items <= 0 || dim <= 0)
    throw std::runtime_error("load_model: bad dimension header in " + path);
  out.model.user_vecs.resize(users, dim);
  out.model.item_vecs.resize(items, dim);
  const auto read_into = [&f, &path](Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (!(f >> m(r, c))) throw std::runtime_error("load_model: truncated table in " + path);
  };
  read_into(out.model.user_vecs);
  read_into(out.model.item_vecs);
  return out;
}

}  // namespace raid::rec
