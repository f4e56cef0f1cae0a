#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace dscd {

struct Observation {
  std::vector<double> features;

  std::size_t size() const { return features.size(); }
  bool operator==(const Observation&) const = default;
};

struct ActionDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
};

struct TransitionRecord {
  Observation obs;
  std::size_t action_index = 0;
  double reward = 0.0;
  Observation next_obs;
  bool terminal = false;
  // Actions that were selectable when the action was taken; empty means all.
  std::vector<bool> action_mask;
};

enum class SelectMode { sample, greedy };

struct A2cConfig {
  std::size_t obs_dim = 0;
  std::size_t n_actions = 0;
  std::size_t actor_hidden = 900;
  std::size_t critic_hidden = 100;
  Activation hidden_activation = Activation::tanh;
  double gamma = 0.9;
  double lr_actor = 0.01;
  double lr_critic = 0.05;
  bool clip_gradients = true;
  double clip_norm = 10.0;
  bool zero_init = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (obs_dim == 0) throw ConfigError("a2c: observation dimension must be positive");
    if (n_actions == 0) throw ConfigError("a2c: action set must be non-empty");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("a2c.gamma must lie in [0, 1]");
    if (!(lr_actor > 0.0 && lr_actor <= 1.0)) throw ConfigError("a2c.lr_actor must lie in (0, 1]");
    if (!(lr_critic > 0.0 && lr_critic <= 1.0)) throw ConfigError("a2c.lr_critic must lie in (0, 1]");
    if (clip_gradients && !(clip_norm > 0.0)) throw ConfigError("a2c.clip_norm must be positive");
  }
};

// Draws an action index from dist. Greedy picks the argmax, lowest index on ties.
// Zero-probability actions are never returned.
inline std::size_t select_action(const ActionDistribution& dist, SelectMode mode, Rng& rng) {
  if (dist.probs.empty()) throw ConfigError("empty action distribution");
  if (mode == SelectMode::greedy) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.size(); ++i)
      if (dist[i] > dist[best]) best = i;
    return best;
  }
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    last_positive = i;
    cumulative += dist[i];
    if (u < cumulative) return i;
  }
  return last_positive;
}

// One-step advantage actor-critic: softmax actor, scalar TD(0) critic, and the
// TD error used as the advantage for the policy-gradient step.
class A2cAgent {
 public:
  explicit A2cAgent(const A2cConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::vector<std::size_t> actor_dims{cfg.obs_dim, cfg.actor_hidden, cfg.n_actions};
    const std::vector<std::size_t> critic_dims{cfg.obs_dim, cfg.critic_hidden, 1};
    const std::vector<Activation> actor_acts{cfg.hidden_activation, Activation::softmax};
    const std::vector<Activation> critic_acts{cfg.hidden_activation, Activation::identity};
    if (cfg.zero_init) {
      actor_ = FeedForwardNet(actor_dims, actor_acts);
      critic_ = FeedForwardNet(critic_dims, critic_acts);
    } else {
      Rng init = make_stream(cfg.seed, "a2c-init");
      actor_ = FeedForwardNet::uniform_init(actor_dims, actor_acts, init);
      critic_ = FeedForwardNet::uniform_init(critic_dims, critic_acts, init);
    }
  }

  // Agent over caller-built networks (e.g. a linear critic).
  A2cAgent(FeedForwardNet actor, FeedForwardNet critic, const A2cConfig& cfg)
      : cfg_(cfg), actor_(std::move(actor)), critic_(std::move(critic)) {
    cfg_.obs_dim = actor_.input_dim();
    cfg_.n_actions = actor_.output_dim();
    cfg_.validate();
    if (actor_.layers().back().activation != Activation::softmax)
      throw ConfigError("actor output layer must be softmax");
    if (critic_.output_dim() != 1) throw ConfigError("critic must have exactly one output");
    if (critic_.input_dim() != actor_.input_dim()) throw ConfigError("actor and critic input dims differ");
  }

  const A2cConfig& config() const { return cfg_; }
  const FeedForwardNet& actor() const { return actor_; }
  const FeedForwardNet& critic() const { return critic_; }
  FeedForwardNet& actor() { return actor_; }
  FeedForwardNet& critic() { return critic_; }
  std::size_t n_actions() const { return cfg_.n_actions; }
  std::size_t obs_dim() const { return cfg_.obs_dim; }

  ActionDistribution forward_actor(const Observation& obs, const std::vector<bool>& mask = {}) const {
    check_obs(obs);
    if (mask.empty()) return {actor_.forward(obs.features)};
    return {masked_softmax(logits(obs), mask)};
  }

  double critic_value(const Observation& obs) const {
    check_obs(obs);
    return critic_.forward(obs.features)[0];
  }

  double td_error(const TransitionRecord& t) const {
    const double next = t.terminal ? 0.0 : critic_value(t.next_obs);
    return t.reward + cfg_.gamma * next - critic_value(t.obs);
  }

  // Semi-gradient step on the squared TD error; the bootstrap target is held fixed.
  double update_critic(const TransitionRecord& t) {
    const double delta = td_error(t);
    if (!std::isfinite(delta)) throw NumericalError("critic: non-finite TD error");
    if (delta == 0.0) return delta;
    const auto tr = critic_.trace(t.obs.features);
    const auto deltas = critic_.layer_deltas(tr, {1.0});
    critic_.apply_factored(tr, deltas, cfg_.lr_critic * delta * clip_factor(tr, deltas, delta, "critic"));
    return delta;
  }

  // theta += lr_actor * delta * grad log pi(a | obs)
  void update_actor(const TransitionRecord& t, double delta) {
    if (!std::isfinite(delta)) throw NumericalError("actor: non-finite advantage");
    if (t.action_index >= cfg_.n_actions) throw ConfigError("action index outside the action set");
    if (delta == 0.0) return;
    const auto tr = actor_.trace(t.obs.features);
    const auto deltas = actor_.layer_deltas(tr, log_prob_logit_gradient(tr, t.action_index, t.action_mask));
    actor_.apply_factored(tr, deltas, cfg_.lr_actor * delta * clip_factor(tr, deltas, delta, "actor"));
  }

  // Critic step followed by the actor step with the pre-update TD error.
  double learn(const TransitionRecord& t) {
    const double delta = update_critic(t);
    update_actor(t, delta);
    return delta;
  }

  Gradient value_gradient(const Observation& obs) const {
    check_obs(obs);
    const auto tr = critic_.trace(obs.features);
    const std::vector<double> one{1.0};
    return critic_.backward(tr, one);
  }

  // Gradient of log pi(action | obs) under the (optionally masked) softmax policy.
  Gradient log_prob_gradient(const Observation& obs, std::size_t action, const std::vector<bool>& mask = {}) const {
    check_obs(obs);
    const auto tr = actor_.trace(obs.features);
    return actor_.backward_from_preactivation(tr, log_prob_logit_gradient(tr, action, mask));
  }

  nlohmann::json snapshot() const {
    return {{"gamma", cfg_.gamma},
            {"lr_actor", cfg_.lr_actor},
            {"lr_critic", cfg_.lr_critic},
            {"actor", to_json(actor_)},
            {"critic", to_json(critic_)}};
  }

  void restore(const nlohmann::json& j) {
    FeedForwardNet actor = net_from_json(j.at("actor"));
    FeedForwardNet critic = net_from_json(j.at("critic"));
    if (actor.layer_dims() != actor_.layer_dims() || critic.layer_dims() != critic_.layer_dims())
      throw ConfigError("checkpoint shape does not match agent");
    actor_ = std::move(actor);
    critic_ = std::move(critic);
  }

 private:
  void check_obs(const Observation& obs) const {
    if (obs.size() != cfg_.obs_dim)
      throw ConfigError("observation has " + std::to_string(obs.size()) + " features, agent expects " +
                        std::to_string(cfg_.obs_dim));
  }

  std::vector<double> logits(const Observation& obs) const { return actor_.trace(obs.features).logits; }

  std::vector<double> log_prob_logit_gradient(const ForwardTrace& tr, std::size_t action,
                                              const std::vector<bool>& mask) const {
    if (action >= cfg_.n_actions) throw ConfigError("action index outside the action set");
    if (!mask.empty() && (mask.size() != cfg_.n_actions || !mask[action]))
      throw ConfigError("taken action is masked out");
    const auto& p = tr.output();
    double valid_mass = 1.0;
    if (!mask.empty()) {
      valid_mass = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i)
        if (mask[i]) valid_mass += p[i];
    }
    // d log pi_masked(a) / dz_i = [i == a] - [i valid] p_i / valid_mass
    std::vector<double> dz(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool valid = mask.empty() || mask[i];
      dz[i] = (i == action ? 1.0 : 0.0) - (valid ? p[i] / valid_mass : 0.0);
    }
    return dz;
  }

  // Multiplier applied to delta * gradient so its global norm stays within clip_norm.
  double clip_factor(const ForwardTrace& tr, const std::vector<std::vector<double>>& deltas, double delta,
                     const char* who) const {
    const double norm = std::abs(delta) * std::sqrt(FeedForwardNet::factored_squared_norm(tr, deltas));
    if (!std::isfinite(norm)) throw NumericalError(std::string(who) + ": non-finite gradient");
    if (cfg_.clip_gradients && norm > cfg_.clip_norm) return cfg_.clip_norm / norm;
    return 1.0;
  }

  A2cConfig cfg_;
  FeedForwardNet actor_;
  FeedForwardNet critic_;
};

}  // namespace dscd
