#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sessionlens/events.hpp"
#include "sessionlens/knowledge.hpp"

namespace sessionlens {

// SERP URL prefix used by generated logs; pass it to session assembly.
inline constexpr char kSynthSerpPrefix[] = "https://serp.synth.test/";

// Linear coupling between a behavioral feature's latent and the generated
// knowledge gain / state.
struct EffectSpec {
  double on_gain = 0.0;
  double on_state = 0.0;
};

struct GeneratorSpec {
  int n_sessions = 100;
  int n_topics = 5;
  std::uint64_t seed = 1;
  std::map<std::string, EffectSpec> effects;  // keys from plantable_features()

  // Session-shape distribution parameters, mean-corrected for truncation so
  // the generated feature means land on the configured values.
  double session_minutes_mean = 4.82, session_minutes_sd = 5.20;
  double pages_mean = 5.46, pages_sd = 3.41;
  double queries_mean = 2.20, queries_sd = 2.18;
  double query_terms_mean = 4.56, query_terms_sd = 2.63;

  // Knowledge-score shaping: gain/state draws are scaled to these moments,
  // clipped to their domains, then rounded to 1/items_per_test resolution by
  // answer synthesis.
  double gain_mean = 0.193, gain_sd = 0.231;
  double state_mean = 0.618, state_sd = 0.191;
  // Latent noise mixed into gain/state alongside the planted effects; the
  // latent is normalized, so corr(feature, gain) ~ effect / sqrt(sum of
  // squared effects + noise^2).
  double noise_sd = 1.0;
  int items_per_test = 20;

  static GeneratorSpec parse(const nlohmann::json& doc);
  static GeneratorSpec load(const std::string& path);
};

// The canonical feature names generate() can couple to gain or state. Each
// has a dedicated generator knob; effects on other names throw DataError.
const std::vector<std::string>& plantable_features();

struct SynthResult {
  std::vector<Event> events;           // grouped by session, time-ordered
  std::vector<KnowledgeRecord> records;  // one per session, scored
};

// Deterministic per spec (identical spec => byte-identical serialized logs).
// Generated sessions always survive parsing, assembly with kSynthSerpPrefix,
// and participant filtering.
SynthResult generate(const GeneratorSpec& spec);

}  // namespace sessionlens
