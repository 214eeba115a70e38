#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dexr/corpus/profiles.hpp"
#include "dexr/corpus/synthetic.hpp"
#include "dexr/diffusion/schedule.hpp"
#include "dexr/error.hpp"
#include "dexr/model/config.hpp"
#include "dexr/training/trainer.hpp"

namespace dexr {

/// Flat key/value configuration shared by every subcommand. Loaded from a
/// JSON object; command-line flags are applied on top.
struct run_config {
    std::uint64_t seed = 1;
    keyword_mode mode = keyword_mode::none;
    std::size_t stride = 1;
    bool ablate_diffusion = false;

    // data generation
    std::string preset = "amazon";  // amazon | tripadvisor
    std::size_t num_users = 0;      // 0 keeps the preset's value
    std::size_t num_items = 0;
    double records_per_user = 0.0;
    double rating_noise_std = -1.0;  // < 0 keeps the preset's value

    // profiles
    std::size_t profile_k = 5;
    std::string ranking = "similarity";  // similarity | recency
    std::size_t embed_dim = 32;
    std::size_t min_count = 1;

    // model and diffusion
    model_config model;
    schedule_kind schedule = schedule_kind::cosine;

    // training
    train_config train;
    std::size_t checkpoint_every = 10;

    synthetic_spec synthetic() const {
        synthetic_spec s = preset == "tripadvisor" ? synthetic_spec::tripadvisor_like() : synthetic_spec::amazon_like();
        if (num_users) s.num_users = num_users;
        if (num_items) s.num_items = num_items;
        if (records_per_user > 0) s.records_per_user = records_per_user;
        if (rating_noise_std >= 0) s.rating_noise_std = rating_noise_std;
        s.seed = seed;
        return s;
    }

    profile_options profiles() const {
        profile_options o;
        o.k = profile_k;
        o.ranking = ranking == "recency" ? profile_ranking::recency : profile_ranking::target_similarity;
        return o;
    }

    void validate() const {
        if (preset != "amazon" && preset != "tripadvisor")
            throw validation_error("config: preset must be 'amazon' or 'tripadvisor'");
        if (ranking != "similarity" && ranking != "recency")
            throw validation_error("config: ranking must be 'similarity' or 'recency'");
        if (stride < 1) throw validation_error("config: stride must be >= 1");
        if (profile_k < 1) throw validation_error("config: profile_k must be >= 1");
        if (embed_dim < 1) throw validation_error("config: embed_dim must be >= 1");
        if (min_count < 1) throw validation_error("config: min_count must be >= 1");
        if (checkpoint_every < 1) throw validation_error("config: checkpoint_every must be >= 1");
        synthetic().validate();
        train.validate();
    }
};

namespace detail {

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw validation_error(std::string("config: bad value for '") + key + "'");
    }
}

}  // namespace detail

inline const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys{
        "seed", "mode", "stride", "ablate_diffusion", "preset", "num_users", "num_items", "records_per_user",
        "rating_noise_std", "profile_k", "ranking", "embed_dim", "min_count", "d_model", "num_heads",
        "num_layers", "ffn_dim", "max_encoder_len", "max_review_len", "horizon", "dropout", "schedule",
        "lambda_ctx", "lambda_r", "lambda_w", "batch_size", "lr", "clip", "decay", "stop_after",
        "reset_on_improve", "max_epochs", "checkpoint_every"};
    return keys;
}

/// Applies a flat JSON object to `cfg`. Unknown keys are rejected.
inline void apply_config(run_config& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw validation_error("config: expected a JSON object");
    const auto& keys = run_config_keys();
    for (const auto& [k, v] : j.items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end())
            throw validation_error("config: unknown key '" + k + "'");
    using detail::read_key;
    read_key(j, "seed", cfg.seed);
    if (j.contains("mode")) cfg.mode = parse_keyword_mode(j.at("mode").get<std::string>());
    read_key(j, "stride", cfg.stride);
    read_key(j, "ablate_diffusion", cfg.ablate_diffusion);
    read_key(j, "preset", cfg.preset);
    read_key(j, "num_users", cfg.num_users);
    read_key(j, "num_items", cfg.num_items);
    read_key(j, "records_per_user", cfg.records_per_user);
    read_key(j, "rating_noise_std", cfg.rating_noise_std);
    read_key(j, "profile_k", cfg.profile_k);
    read_key(j, "ranking", cfg.ranking);
    read_key(j, "embed_dim", cfg.embed_dim);
    read_key(j, "min_count", cfg.min_count);
    read_key(j, "d_model", cfg.model.d_model);
    read_key(j, "num_heads", cfg.model.num_heads);
    read_key(j, "num_layers", cfg.model.num_layers);
    read_key(j, "ffn_dim", cfg.model.ffn_dim);
    read_key(j, "max_encoder_len", cfg.model.max_encoder_len);
    read_key(j, "max_review_len", cfg.model.max_review_len);
    read_key(j, "horizon", cfg.model.horizon);
    read_key(j, "dropout", cfg.model.dropout);
    if (j.contains("schedule")) cfg.schedule = parse_schedule_kind(j.at("schedule").get<std::string>());
    read_key(j, "lambda_ctx", cfg.train.weights.context);
    read_key(j, "lambda_r", cfg.train.weights.rating);
    read_key(j, "lambda_w", cfg.train.weights.words);
    read_key(j, "batch_size", cfg.train.batch_size);
    read_key(j, "lr", cfg.train.learning_rate);
    read_key(j, "clip", cfg.train.clip_max_norm);
    read_key(j, "decay", cfg.train.policy.decay);
    read_key(j, "stop_after", cfg.train.policy.stop_after);
    read_key(j, "reset_on_improve", cfg.train.policy.reset_on_improve);
    read_key(j, "max_epochs", cfg.train.max_epochs);
    read_key(j, "checkpoint_every", cfg.checkpoint_every);
}

inline run_config load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("config '" + path + "': " + e.what());
    }
    run_config cfg;
    apply_config(cfg, j);
    return cfg;
}

inline nlohmann::ordered_json to_json(const run_config& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["mode"] = std::string(to_string(c.mode));
    j["stride"] = c.stride;
    j["ablate_diffusion"] = c.ablate_diffusion;
    j["preset"] = c.preset;
    j["num_users"] = c.num_users;
    j["num_items"] = c.num_items;
    j["records_per_user"] = c.records_per_user;
    j["rating_noise_std"] = c.rating_noise_std;
    j["profile_k"] = c.profile_k;
    j["ranking"] = c.ranking;
    j["embed_dim"] = c.embed_dim;
    j["min_count"] = c.min_count;
    j["d_model"] = c.model.d_model;
    j["num_heads"] = c.model.num_heads;
    j["num_layers"] = c.model.num_layers;
    j["ffn_dim"] = c.model.ffn_dim;
    j["max_encoder_len"] = c.model.max_encoder_len;
    j["max_review_len"] = c.model.max_review_len;
    j["horizon"] = c.model.horizon;
    j["dropout"] = c.model.dropout;
    j["schedule"] = std::string(to_string(c.schedule));
    j["lambda_ctx"] = c.train.weights.context;
    j["lambda_r"] = c.train.weights.rating;
    j["lambda_w"] = c.train.weights.words;
    j["batch_size"] = c.train.batch_size;
    j["lr"] = c.train.learning_rate;
    j["clip"] = c.train.clip_max_norm;
    j["decay"] = c.train.policy.decay;
    j["stop_after"] = c.train.policy.stop_after;
    j["reset_on_improve"] = c.train.policy.reset_on_improve;
    j["max_epochs"] = c.train.max_epochs;
    j["checkpoint_every"] = c.checkpoint_every;
    return j;
}

}  // namespace dexr
