#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dexr/corpus/record.hpp"
#include "dexr/corpus/text.hpp"
#include "dexr/error.hpp"
#include "dexr/random.hpp"

namespace dexr {

/// Shape and noise parameters of the synthetic review corpus.
///
/// Each user has latent aspect preferences and a rating bias; each item has
/// aspect qualities, aspect salience, a bias and a favourite feature word per
/// aspect. A record's rating is an affine function of the (user, item)
/// affinity plus Gaussian noise, clipped to [1, 5]. Its review realises one
/// template with exactly one feature token and one opinion token, the
/// opinion chosen from the bucket matching the rating.
struct synthetic_spec {
    std::size_t num_users = 388;
    std::size_t num_items = 229;
    double records_per_user = 4.62;
    std::size_t num_aspects = 8;    // at most 8
    std::size_t num_templates = 12; // at most 12
    double rating_noise_std = 0.3;
    double rating_offset = 3.4;
    double rating_scale = 1.0;
    double user_bias_std = 0.5;
    double item_bias_std = 0.9;
    double interaction_weight = 0.6;
    double item_feature_loyalty = 0.6;   // P(feature = item's favourite for the aspect)
    double user_template_loyalty = 0.8;  // P(template = one of the user's two favourites)
    std::uint64_t seed = 7;

    /// Amazon Clothing/Shoes/Jewellery shape at 1/100 scale.
    static synthetic_spec amazon_like() { return {}; }

    /// TripAdvisor shape at 1/100 scale (98 users, 63 items, ~32.8 records/user).
    static synthetic_spec tripadvisor_like() {
        synthetic_spec s;
        s.num_users = 98;
        s.num_items = 63;
        s.records_per_user = 32.77;
        return s;
    }

    void validate() const {
        if (num_users < 1 || num_items < 1) throw validation_error("synthetic: need users and items");
        if (num_aspects < 1 || num_aspects > 8) throw validation_error("synthetic: num_aspects in [1, 8]");
        if (num_templates < 1 || num_templates > 12) throw validation_error("synthetic: num_templates in [1, 12]");
        if (!(records_per_user >= 2.0)) throw validation_error("synthetic: records_per_user must be >= 2");
        if (!(rating_noise_std >= 0.0)) throw validation_error("synthetic: rating_noise_std must be >= 0");
    }
};

namespace synthetic_words {

inline constexpr std::array<std::array<std::string_view, 5>, 8> features{{
    {"fit", "size", "length", "width", "waist"},
    {"material", "fabric", "leather", "cotton", "silk"},
    {"color", "pattern", "print", "design", "style"},
    {"comfort", "padding", "sole", "insole", "cushion"},
    {"bracelet", "necklace", "ring", "earrings", "pendant"},
    {"stitching", "seams", "zipper", "buttons", "clasp"},
    {"boots", "sneakers", "sandals", "heels", "laces"},
    {"watch", "belt", "wallet", "scarf", "hat"},
}};

inline constexpr std::array<std::array<std::string_view, 5>, 3> opinions{{
    {"poor", "cheap", "flimsy", "terrible", "awful"},      // rating < 2.5
    {"okay", "decent", "fine", "average", "acceptable"},   // 2.5 <= rating < 4
    {"great", "perfect", "beautiful", "lovely", "excellent"},
}};

// F = feature slot, O = opinion slot
inline constexpr std::array<std::string_view, 12> templates{
    "the F is O",
    "very O F",
    "i really like how O the F is",
    "this F was O overall",
    "my wife says the F looks O",
    "the F feels O in person",
    "O F and i would buy again",
    "just as expected the F is quite O",
    "one of the most O F i own",
    "so O F definitely worth it",
    "love it the F is so O",
    "the F was O as described",
};

}  // namespace synthetic_words

struct synthetic_corpus {
    record_set records;
    std::vector<std::string> feature_lexicon;
    std::vector<double> affinity;  // per record, before the affine map and noise
};

inline std::size_t opinion_bucket(double rating) { return rating < 2.5 ? 0 : (rating < 4.0 ? 1 : 2); }

inline synthetic_corpus synth_generate(const synthetic_spec& spec) {
    spec.validate();
    rng_type rng = seed_streams(spec.seed).stream("data");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t A = spec.num_aspects;

    struct user_latent {
        std::vector<double> pref;
        double bias;
        std::array<std::size_t, 2> templates;
    };
    struct item_latent {
        std::vector<double> quality, salience;
        double bias;
        std::vector<std::size_t> favourite;
    };
    std::vector<user_latent> users(spec.num_users);
    for (auto& u : users) {
        u.pref.resize(A);
        for (auto& v : u.pref) v = normal(rng);
        u.bias = spec.user_bias_std * normal(rng);
        std::uniform_int_distribution<std::size_t> pick(0, spec.num_templates - 1);
        u.templates = {pick(rng), pick(rng)};
    }
    std::vector<item_latent> items(spec.num_items);
    std::vector<double> popularity(spec.num_items);
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& it = items[i];
        it.quality.resize(A);
        it.salience.resize(A);
        it.favourite.resize(A);
        for (auto& v : it.quality) v = normal(rng);
        for (auto& v : it.salience) v = 1.5 * normal(rng);
        it.bias = spec.item_bias_std * normal(rng);
        std::uniform_int_distribution<std::size_t> pick(0, 4);
        for (auto& f : it.favourite) f = pick(rng);
        popularity[i] = 1.0 / std::sqrt(static_cast<double>(i + 1));
    }

    const auto total = static_cast<std::size_t>(
        std::llround(spec.records_per_user * static_cast<double>(spec.num_users)));
    // every user and item appears at least twice
    std::vector<std::size_t> user_slots, item_slots;
    for (std::size_t u = 0; u < spec.num_users; ++u) user_slots.insert(user_slots.end(), {u, u});
    for (std::size_t i = 0; i < spec.num_items; ++i) item_slots.insert(item_slots.end(), {i, i});
    const std::size_t n = std::max({total, user_slots.size(), item_slots.size()});
    std::uniform_int_distribution<std::size_t> any_user(0, spec.num_users - 1);
    std::discrete_distribution<std::size_t> any_item(popularity.begin(), popularity.end());
    while (user_slots.size() < n) user_slots.push_back(any_user(rng));
    while (item_slots.size() < n) item_slots.push_back(any_item(rng));
    std::shuffle(user_slots.begin(), user_slots.end(), rng);
    std::shuffle(item_slots.begin(), item_slots.end(), rng);

    synthetic_corpus out;
    for (std::size_t a = 0; a < A; ++a)
        for (auto f : synthetic_words::features[a]) out.feature_lexicon.emplace_back(f);

    const int id_width = static_cast<int>(std::to_string(n).size());
    for (std::size_t r = 0; r < n; ++r) {
        const auto& u = users[user_slots[r]];
        const auto& it = items[item_slots[r]];
        double dot = 0.0;
        for (std::size_t a = 0; a < A; ++a) dot += u.pref[a] * it.quality[a];
        const double aff = u.bias + it.bias + spec.interaction_weight * dot / std::sqrt(double(A));
        double rating = spec.rating_offset + spec.rating_scale * aff;
        if (spec.rating_noise_std > 0.0) rating += spec.rating_noise_std * normal(rng);
        rating = std::clamp(rating, 1.0, 5.0);

        std::vector<double> logits(A);
        for (std::size_t a = 0; a < A; ++a) logits[a] = std::exp(it.salience[a] + u.pref[a]);
        const std::size_t aspect = std::discrete_distribution<std::size_t>(logits.begin(), logits.end())(rng);
        std::size_t fidx = it.favourite[aspect];
        if (unit(rng) >= spec.item_feature_loyalty) fidx = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
        const std::string feature(synthetic_words::features[aspect][fidx]);
        const auto& bucket = synthetic_words::opinions[opinion_bucket(rating)];
        const std::string opinion(bucket[std::uniform_int_distribution<std::size_t>(0, 4)(rng)]);
        std::size_t tpl = u.templates[std::uniform_int_distribution<std::size_t>(0, 1)(rng)];
        if (unit(rng) >= spec.user_template_loyalty)
            tpl = std::uniform_int_distribution<std::size_t>(0, spec.num_templates - 1)(rng);

        token_list review;
        for (const auto& w : split_tokens(synthetic_words::templates[tpl])) {
            if (w == "F")
                review.push_back(feature);
            else if (w == "O")
                review.push_back(opinion);
            else
                review.push_back(w);
        }

        char id[32];
        std::snprintf(id, sizeof id, "r%0*zu", id_width, r);
        char uid[32], iid[32];
        std::snprintf(uid, sizeof uid, "u%zu", user_slots[r]);
        std::snprintf(iid, sizeof iid, "i%zu", item_slots[r]);
        out.records.push_back(interaction_record{id, uid, iid, rating, std::move(review), feature, opinion});
        out.affinity.push_back(aff);
    }
    return out;
}

struct data_splits {
    record_set train, valid, test;
};

/// Seeded 8:1:1 split by record. Records are shuffled; the training split
/// is first seeded with one record per uncovered user and item so every id
/// seen in evaluation also has a training row, then topped up to its quota.
inline data_splits split_records(const record_set& records, std::uint64_t seed,
                                 double train_frac = 0.8, double valid_frac = 0.1) {
    const std::size_t n = records.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng_type rng = seed_streams(seed).stream("split");
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * double(n)));
    const auto n_valid = static_cast<std::size_t>(std::llround(valid_frac * double(n)));
    std::vector<char> in_train(n, 0);
    std::unordered_set<std::string> users, items;
    std::size_t taken = 0;
    for (std::size_t idx : order) {
        const auto& r = records[idx];
        if (!users.count(r.user) || !items.count(r.item)) {
            in_train[idx] = 1;
            users.insert(r.user);
            items.insert(r.item);
            ++taken;
        }
    }
    for (std::size_t idx : order) {
        if (taken >= n_train) break;
        if (!in_train[idx]) {
            in_train[idx] = 1;
            ++taken;
        }
    }
    data_splits out;
    std::size_t valid_taken = 0;
    // keep original (chronological) order inside each split
    std::vector<int> bucket(n, 0);
    for (std::size_t idx : order) {
        if (in_train[idx]) continue;
        if (valid_taken < n_valid) {
            bucket[idx] = 1;
            ++valid_taken;
        } else {
            bucket[idx] = 2;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (in_train[i])
            out.train.push_back(records[i]);
        else if (bucket[i] == 1)
            out.valid.push_back(records[i]);
        else
            out.test.push_back(records[i]);
    }
    return out;
}

}  // namespace dexr
