#include "attfc/train_config.hpp"

#include <fstream>
#include <set>

#include "attfc/dcc.hpp"

namespace attfc {

using nlohmann::json;

std::string to_string(HeadMode mode) { return mode == HeadMode::fc ? "fc" : "attfc"; }

HeadMode head_mode_from_string(const std::string& name) {
    if (name == "fc") {
        return HeadMode::fc;
    }
    if (name == "attfc") {
        return HeadMode::attfc;
    }
    throw ConfigError("head: unknown head mode '" + name + "' (expected fc|attfc)");
}

void TrainConfig::validate() const {
    try {
        dataset.validate();
        margin.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    if (epochs == 0 && steps == 0) {
        throw ConfigError("epochs or steps must be positive");
    }
    if (k == 0 && head == HeadMode::attfc) {
        throw ConfigError("k must be at least 1");
    }
    if (k + 1 > dataset.train_images_per_identity()) {
        throw ConfigError("k: k + 1 exceeds the training images per identity");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw ConfigError("gamma must lie in [0, 1]");
    }
    if (!(lr0 >= 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0)) {
        throw ConfigError("lr0, momentum and weight_decay must be nonnegative");
    }
    if (!(attention_temperature > 0.0)) {
        throw ConfigError("attention_temperature must be positive");
    }
    if (feature_dim == 0) {
        throw ConfigError("feature_dim must be positive");
    }
    for (std::size_t w : hidden) {
        if (w == 0) {
            throw ConfigError("hidden: layer widths must be positive");
        }
    }
    if (threads == 0) {
        throw ConfigError("threads must be positive");
    }
    if (sampler == SamplerMode::conflict_stress && (duplicates < 2 || duplicates > batch_size)) {
        throw ConfigError("sampler.duplicates must lie in [2, batch_size] for conflict_stress");
    }
    if (eval_pairs == 0) {
        throw ConfigError("eval_pairs must be positive");
    }
    if (head == HeadMode::attfc) {
        try {
            const std::size_t slots = dcc_capacity(dataset.identities, size_ratio, batch_size);
            if (slots < 2) {
                throw ConfigError("size_ratio: container needs at least 2 slots");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(std::string("size_ratio: ") + e.what());
        }
    }
}

std::size_t TrainConfig::steps_per_epoch() const {
    const std::size_t images = dataset.identities * dataset.train_images_per_identity();
    return (images + batch_size - 1) / batch_size;
}

std::size_t TrainConfig::total_steps() const { return steps != 0 ? steps : epochs * steps_per_epoch(); }

std::vector<std::size_t> TrainConfig::encoder_widths() const {
    std::vector<std::size_t> widths{dataset.input_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(feature_dim);
    return widths;
}

std::size_t TrainConfig::head_slots() const {
    return head == HeadMode::fc ? dataset.identities : dcc_capacity(dataset.identities, size_ratio, batch_size);
}

json to_json(const TrainConfig& cfg) {
    return json{
        {"head", to_string(cfg.head)},
        {"strategy", to_string(cfg.strategy)},
        {"attention_temperature", cfg.attention_temperature},
        {"batch_size", cfg.batch_size},
        {"epochs", cfg.epochs},
        {"steps", cfg.steps},
        {"size_ratio", cfg.size_ratio},
        {"k", cfg.k},
        {"gamma", cfg.gamma},
        {"margin", {{"mode", to_string(cfg.margin.mode)}, {"scale", cfg.margin.scale}, {"margin", cfg.margin.margin}}},
        {"lr0", cfg.lr0},
        {"momentum", cfg.momentum},
        {"weight_decay", cfg.weight_decay},
        {"fc_weight_decay", cfg.fc_weight_decay},
        {"feature_dim", cfg.feature_dim},
        {"hidden", cfg.hidden},
        {"sampler", {{"mode", to_string(cfg.sampler)}, {"duplicates", cfg.duplicates}}},
        {"seed", cfg.seed},
        {"threads", cfg.threads},
        {"eval_every", cfg.eval_every},
        {"eval_pairs", cfg.eval_pairs},
        {"record_timing", cfg.record_timing},
        {"debug_gradcheck", cfg.debug_gradcheck},
        {"dataset",
         {{"identities", cfg.dataset.identities},
          {"input_dim", cfg.dataset.input_dim},
          {"noise_sigma", cfg.dataset.noise_sigma},
          {"corrupt_sigma", cfg.dataset.corrupt_sigma},
          {"corrupt_prob", cfg.dataset.corrupt_prob},
          {"images_per_identity", cfg.dataset.images_per_identity},
          {"heldout_per_identity", cfg.dataset.heldout_per_identity},
          {"seed", cfg.dataset.seed}}},
    };
}

namespace {

// Reads fields out of one JSON object and rejects any key that was never asked for.
class FieldReader {
public:
    FieldReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
        if (!obj_.is_object()) {
            throw ConfigError(label("") + ": expected an object");
        }
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) {
                    throw ConfigError(label(key) + ": expected true or false");
                }
            } else if constexpr (std::is_unsigned_v<T>) {
                if (!it->is_number_unsigned()) {
                    throw ConfigError(label(key) + ": expected a nonnegative integer");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) {
                    throw ConfigError(label(key) + ": expected a number");
                }
            }
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(label(key) + ": " + e.what());
        }
    }

    template <typename Parse>
    void read_enum(const std::string& key, Parse&& parse) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        if (!it->is_string()) {
            throw ConfigError(label(key) + ": expected a string");
        }
        try {
            parse(it->get<std::string>());
        } catch (const Error& e) {
            throw ConfigError(label(key) + ": " + e.what());
        }
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::string label(const std::string& key) const {
        if (prefix_.empty()) {
            return key.empty() ? "config" : key;
        }
        return key.empty() ? prefix_ : prefix_ + "." + key;
    }

    void finish() const {
        for (const auto& item : obj_.items()) {
            if (!seen_.count(item.key())) {
                throw ConfigError(label(item.key()) + ": unknown field");
            }
        }
    }

private:
    const json& obj_;
    std::string prefix_;
    std::set<std::string> seen_;
};

}  // namespace

TrainConfig config_from_json(const json& doc) {
    TrainConfig cfg;
    FieldReader top(doc, "");
    top.read_enum("head", [&](const std::string& s) { cfg.head = head_mode_from_string(s); });
    top.read_enum("strategy", [&](const std::string& s) { cfg.strategy = gcc_strategy_from_string(s); });
    top.read("attention_temperature", cfg.attention_temperature);
    top.read("batch_size", cfg.batch_size);
    top.read("epochs", cfg.epochs);
    top.read("steps", cfg.steps);
    top.read("size_ratio", cfg.size_ratio);
    top.read("k", cfg.k);
    top.read("gamma", cfg.gamma);
    top.read("lr0", cfg.lr0);
    top.read("momentum", cfg.momentum);
    top.read("weight_decay", cfg.weight_decay);
    top.read("fc_weight_decay", cfg.fc_weight_decay);
    top.read("feature_dim", cfg.feature_dim);
    top.read("seed", cfg.seed);
    top.read("threads", cfg.threads);
    top.read("eval_every", cfg.eval_every);
    top.read("eval_pairs", cfg.eval_pairs);
    top.read("record_timing", cfg.record_timing);
    top.read("debug_gradcheck", cfg.debug_gradcheck);

    if (const json* hidden = top.child("hidden")) {
        if (!hidden->is_array()) {
            throw ConfigError("hidden: expected an array of layer widths");
        }
        cfg.hidden.clear();
        for (const auto& w : *hidden) {
            if (!w.is_number_unsigned()) {
                throw ConfigError("hidden: expected nonnegative integers");
            }
            cfg.hidden.push_back(w.get<std::size_t>());
        }
    }
    if (const json* margin = top.child("margin")) {
        FieldReader r(*margin, "margin");
        r.read_enum("mode", [&](const std::string& s) { cfg.margin.mode = similarity_mode_from_string(s); });
        r.read("scale", cfg.margin.scale);
        r.read("margin", cfg.margin.margin);
        r.finish();
    }
    if (const json* sampler = top.child("sampler")) {
        FieldReader r(*sampler, "sampler");
        r.read_enum("mode", [&](const std::string& s) { cfg.sampler = sampler_mode_from_string(s); });
        r.read("duplicates", cfg.duplicates);
        r.finish();
    }
    if (const json* dataset = top.child("dataset")) {
        FieldReader r(*dataset, "dataset");
        r.read("identities", cfg.dataset.identities);
        r.read("input_dim", cfg.dataset.input_dim);
        r.read("noise_sigma", cfg.dataset.noise_sigma);
        r.read("corrupt_sigma", cfg.dataset.corrupt_sigma);
        r.read("corrupt_prob", cfg.dataset.corrupt_prob);
        r.read("images_per_identity", cfg.dataset.images_per_identity);
        r.read("heldout_per_identity", cfg.dataset.heldout_per_identity);
        r.read("seed", cfg.dataset.seed);
        r.finish();
    }
    top.finish();
    cfg.validate();
    return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects KEY=VALUE, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        value = raw;
    }
    std::string pointer;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw ConfigError("--set: malformed key '" + key + "'");
        }
        pointer += "/" + part;
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    doc[json::json_pointer(pointer)] = value;
}

TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot open config file '" + path + "'");
        }
        doc = json::parse(in, nullptr, false);
        if (doc.is_discarded()) {
            throw ConfigError("config file '" + path + "' is not valid JSON");
        }
        if (doc.is_object() && doc.contains("resolved_config")) {
            doc = json(doc["resolved_config"]);
        }
    }
    for (const auto& o : overrides) {
        apply_override(doc, o);
    }
    return config_from_json(doc);
}

}  // namespace attfc
