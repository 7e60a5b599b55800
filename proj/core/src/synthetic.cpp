// Copyright 2026 The trirec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "trirec/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "trirec/rng.hpp"
#include "trirec/text.hpp"

namespace trirec {

namespace {

struct Topic {
  std::string_view name;
  std::array<std::string_view, 6> words;
};

constexpr std::array<Topic, 16> kTopics{{
    {"country", {"country", "ballad", "banjo", "honky", "rodeo", "twang"}},
    {"pop", {"pop", "catchy", "chorus", "dance", "radio", "glossy"}},
    {"rock", {"rock", "guitar", "riff", "anthem", "amplifier", "grunge"}},
    {"hiphop", {"hiphop", "rhymes", "beats", "sampling", "verses", "turntable"}},
    {"jazz", {"jazz", "swing", "bebop", "saxophone", "improvisation", "smoky"}},
    {"classical", {"symphony", "orchestra", "sonata", "violin", "baroque", "concerto"}},
    {"electronic", {"synth", "techno", "ambient", "pulse", "electronic", "modular"}},
    {"folk", {"folk", "acoustic", "storytelling", "fiddle", "harmony", "heritage"}},
    {"blues", {"blues", "delta", "slide", "soulful", "harmonica", "lament"}},
    {"metal", {"metal", "distortion", "heavy", "thrash", "shred", "doom"}},
    {"reggae", {"reggae", "dub", "island", "offbeat", "roots", "skank"}},
    {"soul", {"soul", "gospel", "groove", "vocal", "motown", "velvet"}},
    {"latin", {"latin", "salsa", "rhythm", "tropical", "bolero", "conga"}},
    {"punk", {"punk", "raw", "rebellion", "garage", "fast", "diy"}},
    {"world", {"world", "tradition", "drums", "ritual", "global", "chant"}},
    {"soundtrack", {"score", "cinematic", "film", "epic", "theme", "orchestral"}},
}};

constexpr std::array<std::string_view, 10> kQualities{
    "warm", "bright", "moody", "intimate", "sprawling",
    "polished", "gritty", "playful", "haunting", "lush"};

std::string_view pick_word(const Topic& topic, Rng& rng) {
  return topic.words[static_cast<std::size_t>(rng.index(topic.words.size()))];
}

std::string capitalize(std::string_view w) {
  std::string s(w);
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::size_t draw_weighted(const std::vector<double>& weights, double total, Rng& rng) {
  double x = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    x -= weights[i];
    if (x < 0.0) return i;
  }
  // Rounding left a sliver; take the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

std::string padded_id(char prefix, int n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*d", prefix, width, n);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_users < 1) throw ValidationError("synthetic: n_users must be >= 1");
  if (group_count < 2) throw ValidationError("synthetic: group_count must be >= 2");
  if (n_items < 8 * group_count) {
    throw ValidationError("synthetic: n_items must be >= 8 * group_count (" +
                          std::to_string(8 * group_count) + ")");
  }
  if (!(skew >= 0.0)) throw ValidationError("synthetic: skew must be >= 0");
  if (dim < 8) throw ValidationError("synthetic: dim must be >= 8");
  if (min_interactions < 2 || max_interactions < min_interactions) {
    throw ValidationError("synthetic: need 2 <= min_interactions <= max_interactions");
  }
  if (max_interactions > n_items / 2) throw ValidationError("synthetic: max_interactions too large for catalog");
  if (!(affinity >= 0.0)) throw ValidationError("synthetic: affinity must be >= 0");
}

Embedding hashed_embedding(std::string_view text, int dim) {
  Embedding v(static_cast<std::size_t>(dim), 0.0);
  for (const auto& tok : text::tokenize(text)) {
    const std::uint64_t h = splitmix64(hash_label(tok));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim))] += sign;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) throw ValidationError("hashed_embedding: text has no usable tokens");
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

Dataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  const auto n_items = static_cast<std::size_t>(spec.n_items);
  const auto n_topics = kTopics.size();

  // Popularity: a random permutation assigns Zipf ranks to item ids.
  Rng pop_rng(derive_seed(spec.seed, "popularity"));
  std::vector<std::size_t> rank(n_items);
  for (std::size_t i = 0; i < n_items; ++i) rank[i] = i;
  pop_rng.shuffle(rank);
  std::vector<double> pop_weight(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    pop_weight[i] = std::pow(static_cast<double>(rank[i] + 1), -spec.skew);
  }

  // Items: the primary topic leans towards the popularity bucket's topic.
  Rng item_rng(derive_seed(spec.seed, "items"));
  std::vector<ItemRecord> items(n_items);
  std::vector<double> topic_mass(n_topics, 0.0);
  for (std::size_t i = 0; i < n_items; ++i) {
    const std::size_t bucket_topic = rank[i] * n_topics / n_items;
    const std::size_t primary =
        item_rng.uniform() < 0.6 ? bucket_topic : static_cast<std::size_t>(item_rng.index(n_topics));
    const std::size_t secondary = static_cast<std::size_t>(item_rng.index(n_topics));
    const Topic& a = kTopics[primary];
    const Topic& b = kTopics[secondary];
    topic_mass[primary] += pop_weight[i];

    ItemRecord& item = items[i];
    item.item_id = padded_id('i', static_cast<int>(i + 1), 4);
    item.title = capitalize(pick_word(a, item_rng)) + " " + capitalize(pick_word(a, item_rng)) + " " +
                 capitalize(pick_word(b, item_rng));
    item.category = std::string(a.name);
    item.description = "A " + std::string(kQualities[item_rng.index(kQualities.size())]) +
                       " record of " + std::string(pick_word(a, item_rng)) + " and " +
                       std::string(pick_word(a, item_rng)) + " with hints of " +
                       std::string(pick_word(b, item_rng)) + ".";
    item.embedding = hashed_embedding(item.title + " " + item.category + " " + item.description, spec.dim);
  }

  // Users prefer mainstream topics half of the time.
  double topic_total = 0.0;
  for (double m : topic_mass) topic_total += m;
  std::vector<double> topic_pref(n_topics);
  for (std::size_t t = 0; t < n_topics; ++t) {
    topic_pref[t] = 0.5 * topic_mass[t] / topic_total + 0.5 / static_cast<double>(n_topics);
  }

  Rng user_rng(derive_seed(spec.seed, "users"));
  std::vector<UserProfile> users(static_cast<std::size_t>(spec.n_users));
  for (std::size_t u = 0; u < users.size(); ++u) {
    const std::size_t first = draw_weighted(topic_pref, 1.0, user_rng);
    std::size_t second = static_cast<std::size_t>(user_rng.index(n_topics));
    if (second == first) second = (second + 1) % n_topics;
    std::vector<std::string> words;
    for (int w = 0; w < 3; ++w) words.emplace_back(pick_word(kTopics[first], user_rng));
    for (int w = 0; w < 2; ++w) words.emplace_back(pick_word(kTopics[second], user_rng));
    UserProfile& user = users[u];
    user.user_id = padded_id('u', static_cast<int>(u + 1), 4);
    user.profile_text = "Loves " + text::join(words, ", ");
    user.embedding = hashed_embedding(user.profile_text, spec.dim);
  }

  // Each item's taste term is divided by its mean over users, so affinity
  // moves interactions between users but leaves item popularity to the skew.
  std::vector<double> appeal(n_items, 0.0);
  for (std::size_t i = 0; i < n_items; ++i) {
    for (const auto& user : users) appeal[i] += std::exp(spec.affinity * cosine_similarity(user.embedding, items[i].embedding));
    appeal[i] /= static_cast<double>(users.size());
  }

  // Interactions: sequential draws without replacement.
  Rng act_rng(derive_seed(spec.seed, "interactions"));
  std::vector<Interaction> interactions;
  const std::int64_t epoch = 1'600'000'000;
  for (std::size_t u = 0; u < users.size(); ++u) {
    const auto& user = users[u];
    std::vector<double> weight(n_items);
    double total = 0.0;
    for (std::size_t i = 0; i < n_items; ++i) {
      weight[i] = pop_weight[i] * std::exp(spec.affinity * cosine_similarity(user.embedding, items[i].embedding)) / appeal[i];
      total += weight[i];
    }
    const int span = spec.max_interactions - spec.min_interactions + 1;
    const int count = spec.min_interactions + static_cast<int>(act_rng.index(static_cast<std::uint64_t>(span)));
    std::int64_t ts = epoch + static_cast<std::int64_t>(u) * 7 * 86400;
    for (int c = 0; c < count; ++c) {
      const std::size_t pick = draw_weighted(weight, total, act_rng);
      total -= weight[pick];
      weight[pick] = 0.0;
      ts += 3600 + static_cast<std::int64_t>(act_rng.index(86400));
      interactions.push_back(Interaction{user.user_id, items[pick].item_id, ts, 1.0});
    }
  }

  // training_pop mirrors the leave-one-out training split.
  const auto split = leave_one_out_split(interactions);
  const auto counts = interaction_counts(split.train);
  for (auto& item : items) {
    auto it = counts.find(item.item_id);
    item.training_pop = it == counts.end() ? 0 : it->second;
  }

  return Dataset{Catalog(std::move(items)), std::move(users), std::move(interactions)};
}

}  // namespace trirec
