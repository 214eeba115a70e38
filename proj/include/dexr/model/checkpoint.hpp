#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexr/corpus/vocabulary.hpp"
#include "dexr/diffusion/schedule.hpp"
#include "dexr/error.hpp"
#include "dexr/model/config.hpp"
#include "dexr/model/inputs.hpp"
#include "dexr/model/network.hpp"

namespace dexr {

inline constexpr const char* checkpoint_format = "dexr-checkpoint";
inline constexpr int checkpoint_version = 1;

/// Everything needed to run a trained model: weights plus the id maps,
/// vocabulary and conditioning choices it was trained with.
struct checkpoint {
    exr_model model;
    keyword_mode mode = keyword_mode::none;
    schedule_kind schedule = schedule_kind::cosine;
    bool ablated = false;
    vocabulary vocab;
    id_index users;
    id_index items;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

inline nlohmann::ordered_json to_json(const model_config& c) {
    nlohmann::ordered_json j;
    j["d_model"] = c.d_model;
    j["num_heads"] = c.num_heads;
    j["num_layers"] = c.num_layers;
    j["ffn_dim"] = c.ffn_dim;
    j["max_encoder_len"] = c.max_encoder_len;
    j["max_review_len"] = c.max_review_len;
    j["vocab_size"] = c.vocab_size;
    j["num_users"] = c.num_users;
    j["num_items"] = c.num_items;
    j["horizon"] = c.horizon;
    j["dropout"] = c.dropout;
    return j;
}

inline model_config model_config_from_json(const nlohmann::json& j) {
    model_config c;
    c.d_model = j.at("d_model").get<std::size_t>();
    c.num_heads = j.at("num_heads").get<std::size_t>();
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.max_encoder_len = j.at("max_encoder_len").get<std::size_t>();
    c.max_review_len = j.at("max_review_len").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.num_users = j.at("num_users").get<std::size_t>();
    c.num_items = j.at("num_items").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    return c;
}

inline nlohmann::ordered_json to_json(const checkpoint& ck) {
    nlohmann::ordered_json j;
    j["format"] = checkpoint_format;
    j["version"] = checkpoint_version;
    j["config"] = to_json(ck.model.config);
    j["keyword_mode"] = std::string(to_string(ck.mode));
    j["schedule"] = {{"kind", std::string(to_string(ck.schedule))}, {"horizon", ck.model.config.horizon}};
    j["ablated"] = ck.ablated;
    j["vocab"] = std::vector<std::string>(ck.vocab.regular_tokens().begin(), ck.vocab.regular_tokens().end());
    j["users"] = ck.users.names();
    j["items"] = ck.items.names();
    auto params = nlohmann::ordered_json::array();
    const auto& p = ck.model.params;
    for (std::size_t i = 0; i < p.size(); ++i) {
        nlohmann::ordered_json e;
        e["name"] = p.name(i);
        e["shape"] = p[i].shape();
        e["data"] = p[i].storage();
        params.push_back(std::move(e));
    }
    j["params"] = std::move(params);
    j["meta"] = ck.meta;
    return j;
}

/// Parses and validates a checkpoint: the parameter list must match, name
/// for name and shape for shape, what the stored config initialises.
inline checkpoint checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != checkpoint_format)
            throw validation_error("checkpoint: unknown format");
        if (j.at("version").get<int>() != checkpoint_version)
            throw validation_error("checkpoint: unsupported version " + std::to_string(j.at("version").get<int>()));
        checkpoint ck;
        ck.model.config = model_config_from_json(j.at("config"));
        ck.model.config.validate();
        ck.mode = parse_keyword_mode(j.at("keyword_mode").get<std::string>());
        ck.schedule = parse_schedule_kind(j.at("schedule").at("kind").get<std::string>());
        ck.ablated = j.at("ablated").get<bool>();
        ck.vocab = vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
        for (const auto& u : j.at("users")) ck.users.add(u.get<std::string>());
        for (const auto& i : j.at("items")) ck.items.add(i.get<std::string>());
        if (ck.vocab.size() != ck.model.config.vocab_size || ck.users.size() != ck.model.config.num_users ||
            ck.items.size() != ck.model.config.num_items)
            throw validation_error("checkpoint: vocabulary or id tables disagree with the config");

        rng_type unused(0);
        const auto expected = init_parameters<double>(ck.model.config, unused);
        const auto& ps = j.at("params");
        if (ps.size() != expected.size())
            throw validation_error("checkpoint: expected " + std::to_string(expected.size()) + " parameters, found " +
                                   std::to_string(ps.size()));
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto name = ps[i].at("name").get<std::string>();
            auto shape = ps[i].at("shape").get<std::vector<std::size_t>>();
            if (name != expected.name(i) || shape != expected[i].shape())
                throw validation_error("checkpoint: parameter " + std::to_string(i) + " is '" + name + "' " +
                                       shape_string(shape) + ", expected '" + expected.name(i) + "' " +
                                       shape_string(expected[i].shape()));
            ck.model.params.add(name, tensor(std::move(shape), ps[i].at("data").get<std::vector<double>>()));
        }
        if (j.contains("meta")) ck.meta = j.at("meta");
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("checkpoint: malformed (") + e.what() + ")");
    }
}

inline void save_checkpoint(const checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot write checkpoint '" + path + "'");
    out << to_json(ck).dump() << '\n';
    if (!out) throw error("failed writing checkpoint '" + path + "'");
}

inline checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw error("missing checkpoint '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("checkpoint '" + path + "': " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace dexr
