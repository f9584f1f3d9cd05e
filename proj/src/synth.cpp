#include "sessionlens/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sessionlens/errors.hpp"
#include "sessionlens/parallel.hpp"
#include "sessionlens/rng.hpp"

namespace sessionlens {

namespace {

double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

// Location offset so that E[max(lb, mu + sd*Z)] equals target. Without the
// correction, truncating at lb drags the generated mean above the target.
double corrected_location(double target, double sd, double lb) {
  if (sd <= 0.0) return target;
  if (target <= lb) {
    throw DataError("generator: distribution mean must exceed its lower bound");
  }
  auto truncated_mean = [&](double mu) {
    const double a = (lb - mu) / sd;
    return lb * normal_cdf(a) + mu * (1.0 - normal_cdf(a)) + sd * normal_pdf(a);
  };
  double lo = target - 12.0 * sd, hi = target;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (truncated_mean(mid) > target ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// Rounds x to an adjacent integer with probability equal to its fractional
// part, preserving the mean exactly.
std::int64_t stochastic_round(Rng& rng, double x) {
  const double f = std::floor(x);
  return static_cast<std::int64_t>(f) + (rng.uniform() < x - f ? 1 : 0);
}

// Indices into the latent vector, in plantable_features() order.
enum Knob {
  kDuration,
  kQueryCount,
  kQueryTerms,
  kClicks,
  kPageCount,
  kActiveShare,
  kLongPage,
  kMouseovers,
  kScrollDelta,
  kScrollPos,
  kKnobCount,
};

constexpr std::int64_t kWindowMs = 30000;
constexpr std::int64_t kChainStepMs = 25000;

struct SessionPlan {
  std::string session_id;
  std::string user_id;
  std::string topic_id;
};

void emit(std::vector<Event>& events, const SessionPlan& plan, std::int64_t ts,
          EventKind kind, EventPayload payload) {
  Event event;
  event.session_id = plan.session_id;
  event.timestamp_ms = ts;
  event.kind = kind;
  event.payload = std::move(payload);
  events.push_back(std::move(event));
}

// Keypresses every 25 s so the 30 s activity windows tile [enter,
// enter + target] exactly; the tail event pins the last window edge.
void emit_activity_chain(std::vector<Event>& events, const SessionPlan& plan,
                         std::int64_t enter_ms, std::int64_t target_ms) {
  if (target_ms <= kWindowMs) return;
  std::int64_t last = enter_ms;
  for (std::int64_t ts = enter_ms + kChainStepMs; ts <= enter_ms + target_ms - kWindowMs;
       ts += kChainStepMs) {
    emit(events, plan, ts, EventKind::kKeypress, KeypressPayload{});
    last = ts;
  }
  const std::int64_t tail = enter_ms + target_ms - kWindowMs;
  if (tail > last) emit(events, plan, tail, EventKind::kKeypress, KeypressPayload{});
}

std::vector<KeyItem> topic_key(std::uint64_t seed, int topic, int items) {
  Rng rng(mix64(seed, 0x746f706963ULL + static_cast<std::uint64_t>(topic)));
  std::vector<KeyItem> key;
  key.reserve(items);
  for (int i = 0; i < items; ++i) {
    std::ostringstream id;
    id << 'q' << (i < 9 ? "0" : "") << i + 1;
    key.push_back({id.str(), rng.below(2) == 1});
  }
  // A single-truth key could make a perfect test look like straight-lining.
  const bool first = key.front().truth;
  if (std::all_of(key.begin(), key.end(),
                  [&](const KeyItem& k) { return k.truth == first; })) {
    key.back().truth = !first;
  }
  return key;
}

std::vector<ItemAnswer> synthesize_answers(Rng& rng, const std::vector<KeyItem>& key,
                                           double score) {
  const int m = static_cast<int>(key.size());
  const int correct = static_cast<int>(std::lround(clip(score, 0.0, 1.0) * m));
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::vector<int> shuffled = order;
  rng.shuffle(shuffled);
  std::vector<bool> is_correct(m, false);
  for (int i = 0; i < correct; ++i) is_correct[shuffled[i]] = true;
  std::vector<ItemAnswer> answers;
  answers.reserve(m);
  for (int i = 0; i < m; ++i) {
    Answer a = Answer::kIdk;
    if (is_correct[i]) a = key[i].truth ? Answer::kTrue : Answer::kFalse;
    answers.push_back({key[i].item_id, a});
  }
  return answers;
}

}  // namespace

const std::vector<std::string>& plantable_features() {
  static const std::vector<std::string> names = {
      "s_duration", "q_num",      "q_term_avg",          "SERP_click",
      "b_num",      "b_time_total", "b_time_max_per_page", "m_num",
      "m_scroll_dist", "m_scroll_max_pos"};
  return names;
}

GeneratorSpec GeneratorSpec::parse(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("generator spec must be a JSON object");
  GeneratorSpec spec;
  spec.n_sessions = doc.value("n_sessions", spec.n_sessions);
  spec.n_topics = doc.value("n_topics", spec.n_topics);
  spec.seed = doc.value("seed", spec.seed);
  spec.session_minutes_mean = doc.value("session_minutes_mean", spec.session_minutes_mean);
  spec.session_minutes_sd = doc.value("session_minutes_sd", spec.session_minutes_sd);
  spec.pages_mean = doc.value("pages_mean", spec.pages_mean);
  spec.pages_sd = doc.value("pages_sd", spec.pages_sd);
  spec.queries_mean = doc.value("queries_mean", spec.queries_mean);
  spec.queries_sd = doc.value("queries_sd", spec.queries_sd);
  spec.query_terms_mean = doc.value("query_terms_mean", spec.query_terms_mean);
  spec.query_terms_sd = doc.value("query_terms_sd", spec.query_terms_sd);
  spec.gain_mean = doc.value("gain_mean", spec.gain_mean);
  spec.gain_sd = doc.value("gain_sd", spec.gain_sd);
  spec.state_mean = doc.value("state_mean", spec.state_mean);
  spec.state_sd = doc.value("state_sd", spec.state_sd);
  spec.noise_sd = doc.value("noise_sd", spec.noise_sd);
  spec.items_per_test = doc.value("items_per_test", spec.items_per_test);
  if (doc.contains("effects")) {
    for (const auto& [name, value] : doc["effects"].items()) {
      EffectSpec effect;
      if (value.is_object()) {
        effect.on_gain = value.value("gain", 0.0);
        effect.on_state = value.value("state", 0.0);
      } else {
        effect.on_gain = value.get<double>();
      }
      spec.effects[name] = effect;
    }
  }
  if (spec.n_sessions < 1) throw DataError("generator: n_sessions must be >= 1");
  if (spec.n_topics < 1) throw DataError("generator: n_topics must be >= 1");
  if (spec.items_per_test < 2) throw DataError("generator: items_per_test must be >= 2");
  return spec;
}

GeneratorSpec GeneratorSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open generator spec: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("generator spec is not valid JSON: ") + e.what());
  }
  return parse(doc);
}

SynthResult generate(const GeneratorSpec& spec) {
  if (spec.n_sessions < 1) throw DataError("generator: n_sessions must be >= 1");
  const auto& knob_names = plantable_features();
  for (const auto& [name, effect] : spec.effects) {
    (void)effect;
    if (std::find(knob_names.begin(), knob_names.end(), name) == knob_names.end()) {
      std::string plantable;
      for (const auto& n : knob_names) plantable += (plantable.empty() ? "" : ", ") + n;
      throw DataError("generator: no knob for feature '" + name +
                      "' (plantable: " + plantable + ")");
    }
  }
  std::array<double, kKnobCount> gain_eff{}, state_eff{};
  for (int knob = 0; knob < kKnobCount; ++knob) {
    const auto it = spec.effects.find(knob_names[static_cast<std::size_t>(knob)]);
    if (it != spec.effects.end()) {
      gain_eff[knob] = it->second.on_gain;
      state_eff[knob] = it->second.on_state;
    }
  }
  const bool long_page_planted =
      gain_eff[kLongPage] != 0.0 || state_eff[kLongPage] != 0.0;
  double denom_gain = spec.noise_sd * spec.noise_sd;
  double denom_state = spec.noise_sd * spec.noise_sd;
  for (int knob = 0; knob < kKnobCount; ++knob) {
    denom_gain += gain_eff[knob] * gain_eff[knob];
    denom_state += state_eff[knob] * state_eff[knob];
  }
  denom_gain = std::sqrt(denom_gain);
  denom_state = std::sqrt(denom_state);

  const double dur_mu =
      corrected_location(spec.session_minutes_mean * 60.0, spec.session_minutes_sd * 60.0, 45.0);
  const double dur_sd = spec.session_minutes_sd * 60.0;
  const double pages_mu = corrected_location(spec.pages_mean, spec.pages_sd, 1.0);
  const double queries_mu = corrected_location(spec.queries_mean, spec.queries_sd, 1.0);
  const double terms_mu = corrected_location(spec.query_terms_mean, spec.query_terms_sd, 1.0);

  std::vector<std::vector<KeyItem>> keys;
  keys.reserve(spec.n_topics);
  for (int t = 0; t < spec.n_topics; ++t) {
    keys.push_back(topic_key(spec.seed, t, spec.items_per_test));
  }

  struct SessionOutput {
    std::vector<Event> events;
    KnowledgeRecord record;
  };
  std::vector<SessionOutput> outputs(static_cast<std::size_t>(spec.n_sessions));
  parallel_for(static_cast<std::size_t>(spec.n_sessions), [&](std::size_t session_index) {
    const int i = static_cast<int>(session_index);
    SessionOutput& out = outputs[session_index];
    Rng rng(mix64(spec.seed, static_cast<std::uint64_t>(i)));
    const int topic = i % spec.n_topics;
    SessionPlan plan;
    {
      std::ostringstream user, tid;
      user << 'u' << i + 1;
      tid << 't' << topic + 1;
      plan.user_id = user.str();
      plan.topic_id = tid.str();
      plan.session_id = plan.user_id + ":" + plan.topic_id;
    }

    std::array<double, kKnobCount> z{};
    for (int knob = 0; knob < kKnobCount; ++knob) z[knob] = rng.normal();
    const double eps_gain = rng.normal();
    const double eps_state = rng.normal();

    const int n_q = static_cast<int>(std::min<std::int64_t>(
        12, std::max<std::int64_t>(
                1, stochastic_round(rng, std::max(1.0, queries_mu +
                                                           spec.queries_sd * z[kQueryCount])))));
    const int n_p = static_cast<int>(std::min<std::int64_t>(
        25, std::max<std::int64_t>(
                1, stochastic_round(rng, std::max(1.0, pages_mu +
                                                           spec.pages_sd * z[kPageCount])))));

    // SERP dwell per query, capped at 30% of the session.
    std::vector<std::int64_t> serp_dwell(n_q);
    std::int64_t serp_total = 0;
    for (auto& d : serp_dwell) {
      d = 2000 + static_cast<std::int64_t>(rng.below(6000));
      serp_total += d;
    }
    std::int64_t duration_ms = static_cast<std::int64_t>(
        std::llround(1000.0 * std::max(45.0, dur_mu + dur_sd * z[kDuration])));
    if (serp_total > (duration_ms * 3) / 10) {
      const std::int64_t budget = std::max<std::int64_t>(500 * n_q, (duration_ms * 3) / 10);
      std::int64_t scaled_total = 0;
      for (auto& d : serp_dwell) {
        d = std::max<std::int64_t>(500, d * budget / serp_total);
        scaled_total += d;
      }
      serp_total = scaled_total;
    }

    // Page dwells: proportional shares of the remaining budget, or explicit
    // dwells when the long-page knob dictates the shape.
    std::vector<double> weights(n_p);
    for (auto& w : weights) w = 1.0 + rng.uniform() * 2.0;
    const std::int64_t long_active_ms = static_cast<std::int64_t>(
        std::llround(1000.0 * clip(75.0 + 20.0 * z[kLongPage], 35.0, 140.0)));
    std::vector<std::int64_t> dwell(n_p);
    if (long_page_planted) {
      dwell[0] = long_active_ms + static_cast<std::int64_t>(rng.below(20000));
      for (int p = 1; p < n_p; ++p) {
        dwell[p] = 20000 + static_cast<std::int64_t>(rng.below(40000));
      }
      duration_ms = serp_total;
      for (const auto d : dwell) duration_ms += d;
    } else {
      std::int64_t budget = duration_ms - serp_total;
      if (budget < 5000LL * n_p) {
        std::fill(dwell.begin(), dwell.end(), 5000);
        duration_ms = serp_total + 5000LL * n_p;
      } else {
        double weight_sum = 0.0;
        for (const double w : weights) weight_sum += w;
        std::int64_t assigned = 0;
        for (int p = 0; p + 1 < n_p; ++p) {
          dwell[p] = static_cast<std::int64_t>(budget * (weights[p] / weight_sum));
          assigned += dwell[p];
        }
        dwell[n_p - 1] = budget - assigned;
      }
    }

    const double active_share = clip(0.55 + 0.18 * z[kActiveShare], 0.15, 0.95);

    // Queries: term counts share the session latent with per-query jitter.
    std::vector<std::vector<std::string>> query_terms(n_q);
    for (int q = 0; q < n_q; ++q) {
      const double mix = 0.8 * z[kQueryTerms] + 0.6 * rng.normal();
      const int len = static_cast<int>(std::min<std::int64_t>(
          12, std::max<std::int64_t>(
                  1, stochastic_round(rng, std::max(1.0, terms_mu +
                                                             spec.query_terms_sd * mix)))));
      for (int j = 0; j < len; ++j) {
        std::ostringstream word;
        word << 'w' << rng.below(300);
        query_terms[q].push_back(word.str());
      }
    }

    std::vector<int> clicks(n_q), mouseovers(n_q);
    for (int q = 0; q < n_q; ++q) {
      const double cz = 0.8 * z[kClicks] + 0.6 * rng.normal();
      clicks[q] = static_cast<int>(
          std::max<std::int64_t>(0, stochastic_round(rng, 1.2 + 1.0 * cz)));
      const double mz = 0.8 * z[kMouseovers] + 0.6 * rng.normal();
      mouseovers[q] = static_cast<int>(
          std::max<std::int64_t>(0, stochastic_round(rng, 2.0 + 2.0 * mz)));
    }

    const std::int64_t big_scroll_delta = static_cast<std::int64_t>(
        std::llround(clip(5000.0 + 3000.0 * z[kScrollDelta], 300.0, 1e7)));
    const std::int64_t big_scroll_pos = static_cast<std::int64_t>(
        std::llround(clip(3200.0 + 900.0 * z[kScrollPos], 400.0, 1e7)));

    // Lay the timeline out segment by segment.
    std::vector<Event>& events = out.events;
    std::int64_t cursor = 0;
    int next_page = 0;
    std::string previous_url;
    for (int q = 0; q < n_q; ++q) {
      std::string text;
      for (const auto& term : query_terms[q]) {
        if (!text.empty()) text += ' ';
        text += term;
      }
      emit(events, plan, cursor, EventKind::kQuery, QueryPayload{text});
      SerpRenderPayload render;
      render.query_index = q;
      render.result_count = 10;
      emit(events, plan, cursor, EventKind::kSerpRender, render);
      for (int m = 0; m < mouseovers[q]; ++m) {
        emit(events, plan, cursor, EventKind::kMouseover,
             MouseoverPayload{static_cast<int>(rng.below(10)) + 1});
      }
      std::ostringstream serp_url;
      serp_url << kSynthSerpPrefix << "s" << i + 1 << "q" << q + 1;
      PageLoadPayload serp_load;
      serp_load.url = serp_url.str();
      serp_load.title = "results " + text;
      serp_load.size_bytes = 15000 + static_cast<std::int64_t>(rng.below(20000));
      emit(events, plan, cursor, EventKind::kPageLoad, serp_load);

      const std::int64_t serp_exit = cursor + serp_dwell[q];
      int remaining_clicks = clicks[q];

      // Pages assigned to this query: contiguous block via proportional map.
      std::vector<int> pages;
      while (next_page < n_p &&
             static_cast<std::int64_t>(next_page) * n_q / n_p == q) {
        pages.push_back(next_page++);
      }

      auto click_rank = [&rng] { return static_cast<int>(rng.below(10)) + 1; };

      if (pages.empty()) {
        // Click targets that are never visited.
        for (int c = 0; c < remaining_clicks; ++c) {
          std::ostringstream url;
          url << "https://r" << c << ".example/skip";
          emit(events, plan, serp_exit, EventKind::kSerpClick,
               SerpClickPayload{click_rank(), url.str()});
        }
        emit(events, plan, serp_exit, EventKind::kPageLeave,
             PageLeavePayload{serp_load.url});
        cursor = serp_exit;
        continue;
      }

      emit(events, plan, serp_exit, EventKind::kPageLeave, PageLeavePayload{serp_load.url});
      cursor = serp_exit;

      for (std::size_t slot = 0; slot < pages.size(); ++slot) {
        const int p = pages[slot];
        std::ostringstream url;
        url << "https://d" << rng.below(6) + 1 << ".example/" << query_terms[q][0] << "-"
            << p + 1;
        const bool clicked = remaining_clicks > 0;
        if (clicked) {
          --remaining_clicks;
          emit(events, plan, cursor, EventKind::kSerpClick,
               SerpClickPayload{click_rank(), url.str()});
          // Surplus clicks for this query land at the same boundary.
          if (slot + 1 == pages.size()) {
            while (remaining_clicks > 0) {
              --remaining_clicks;
              emit(events, plan, cursor, EventKind::kSerpClick,
                   SerpClickPayload{click_rank(), url.str()});
            }
          }
        }
        PageLoadPayload load;
        load.url = url.str();
        load.title = "about " + query_terms[q][0] + " notes " +
                     query_terms[q][query_terms[q].size() - 1];
        load.size_bytes = 20000 + static_cast<std::int64_t>(rng.below(60000));
        load.referrer_url = clicked ? serp_load.url : previous_url;
        emit(events, plan, cursor, EventKind::kPageLoad, load);

        // Scrolls sit on the page-enter timestamp so they never stretch the
        // activity window tiling.
        std::int64_t position = 0;
        const int n_scroll = 1 + static_cast<int>(rng.below(2));
        for (int s = 0; s < n_scroll; ++s) {
          const std::int64_t magnitude = 150 + static_cast<std::int64_t>(rng.below(400));
          const std::int64_t delta = rng.below(2) == 0 ? magnitude : -magnitude;
          position += magnitude;
          emit(events, plan, cursor, EventKind::kScroll, ScrollPayload{delta, position});
        }
        if (p == 0) {
          emit(events, plan, cursor, EventKind::kScroll,
               ScrollPayload{big_scroll_delta, big_scroll_pos});
        }

        std::int64_t active_target;
        if (long_page_planted) {
          active_target = p == 0 ? long_active_ms : std::min(kWindowMs, dwell[p]);
        } else {
          active_target =
              std::max(std::min(kWindowMs, dwell[p]),
                       std::min(dwell[p], static_cast<std::int64_t>(
                                              active_share * static_cast<double>(dwell[p]))));
        }
        emit_activity_chain(events, plan, cursor, active_target);

        emit(events, plan, cursor + dwell[p], EventKind::kPageLeave,
             PageLeavePayload{load.url});
        cursor += dwell[p];
        previous_url = load.url;
      }
    }
    (void)duration_ms;

    // Knowledge record coupled to the planted latents.
    double raw_gain = spec.noise_sd * eps_gain;
    double raw_state = spec.noise_sd * eps_state;
    for (int knob = 0; knob < kKnobCount; ++knob) {
      raw_gain += gain_eff[knob] * z[knob];
      raw_state += state_eff[knob] * z[knob];
    }
    const double u_gain = denom_gain > 0.0 ? raw_gain / denom_gain : 0.0;
    const double u_state = denom_state > 0.0 ? raw_state / denom_state : 0.0;
    const double gain = clip(spec.gain_mean + spec.gain_sd * u_gain, -1.0, 1.0);
    const double post = clip(spec.state_mean + spec.state_sd * u_state, 0.0, 1.0);
    const double pre = clip(post - gain, 0.0, 1.0);

    KnowledgeRecord& record = out.record;
    record.user_id = plan.user_id;
    record.topic_id = plan.topic_id;
    record.answer_key = keys[static_cast<std::size_t>(topic)];
    record.pre_answers = synthesize_answers(rng, record.answer_key, pre);
    record.post_answers = synthesize_answers(rng, record.answer_key, post);
    score_record(record);
  });

  SynthResult result;
  for (auto& out : outputs) {
    result.events.insert(result.events.end(), std::make_move_iterator(out.events.begin()),
                         std::make_move_iterator(out.events.end()));
    result.records.push_back(std::move(out.record));
  }
  return result;
}

}  // namespace sessionlens
