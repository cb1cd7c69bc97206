#pragma once

#include "pgcr/envs.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace pgcr {

using json = nlohmann::ordered_json;

namespace detail {

inline json vec_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Vec vec_from_json(const json& a) {
    Vec v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

}  // namespace detail

/// JSON Lines dataset format: a metadata header line followed by one
/// Transition object per line.
inline std::string dataset_to_jsonl(const OfflineDataset& data) {
    std::ostringstream out;
    json header;
    header["env_fingerprint"] = data.meta.env_fingerprint;
    header["behavior_policy"] = data.meta.behavior_policy;
    header["seed"] = data.meta.seed;
    out << header.dump() << '\n';
    for (const auto& tr : data.transitions) {
        json row;
        row["episode_id"] = tr.episode_id;
        row["t"] = tr.t;
        row["state"] = detail::vec_to_json(tr.state);
        row["action"] = detail::vec_to_json(tr.action);
        row["reward"] = tr.reward;
        row["next_state"] = detail::vec_to_json(tr.next_state);
        row["done"] = tr.done;
        out << row.dump() << '\n';
    }
    return out.str();
}

inline OfflineDataset dataset_from_jsonl(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "dataset: missing header line");
    const json header = json::parse(line);
    OfflineDataset data;
    data.meta.env_fingerprint = header.at("env_fingerprint").get<std::uint64_t>();
    data.meta.behavior_policy = header.at("behavior_policy").get<std::string>();
    data.meta.seed = header.at("seed").get<std::uint64_t>();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json row = json::parse(line);
        Transition tr;
        tr.episode_id = row.at("episode_id").get<int>();
        tr.t = row.at("t").get<int>();
        tr.state = detail::vec_from_json(row.at("state"));
        tr.action = detail::vec_from_json(row.at("action"));
        tr.reward = row.at("reward").get<double>();
        tr.next_state = detail::vec_from_json(row.at("next_state"));
        tr.done = row.at("done").get<bool>();
        data.transitions.push_back(std::move(tr));
    }
    data.validate();
    return data;
}

inline void save_dataset(const std::string& path, const OfflineDataset& data) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_dataset: cannot open " + path);
    out << dataset_to_jsonl(data);
}

inline OfflineDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_dataset: cannot open " + path);
    return dataset_from_jsonl(in);
}

// ---------------------------------------------------------------------------
// Ratings-file ingestion
// ---------------------------------------------------------------------------

struct IngestConfig {
    int window = 5;        // interactions per state window
    int embedding_dim = 16;
    double max_rating = 5.0;  // only recorded in metadata, ratings pass through
};

/// Deterministic feature-hashed item embedding: sign bits from a per-item
/// hash, normalized to unit length.
inline Vec item_embedding(const std::string& item, int dim) {
    Vec emb(dim);
    const std::uint64_t base = fnv1a(item);
    for (int j = 0; j < dim; ++j) {
        const std::uint64_t bits = splitmix64(base + static_cast<std::uint64_t>(j));
        emb[j] = (bits & 1) ? 1.0 : -1.0;
    }
    return emb / std::sqrt(static_cast<double>(dim));
}

/// Parses a delimiter-detected CSV/TSV ratings log with columns
/// (user, item, rating, timestamp), groups by user, sorts by timestamp, and
/// sessionizes: the state is a zero-padded window of the last `window`
/// rating-weighted item embeddings, the action is the next item's embedding
/// and the reward its rating. One episode per user with at least two rows.
inline OfflineDataset ingest_ratings(const std::string& path, const IngestConfig& cfg = {}) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "ingest_ratings: cannot open " + path);
    std::stringstream content;
    content << in.rdbuf();
    const std::string text = content.str();
    require(!text.empty(), "ingest_ratings: empty file");

    struct Row {
        std::string item;
        double rating;
        double timestamp;
        std::size_t order;
    };
    std::map<std::string, std::vector<Row>> by_user;
    std::vector<std::string> user_order;

    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0, parsed_rows = 0;
    char delim = '\0';
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (delim == '\0') delim = (line.find('\t') != std::string::npos) ? '\t' : ',';

        std::vector<std::string> fields;
        std::istringstream split(line);
        std::string field;
        while (std::getline(split, field, delim)) fields.push_back(field);
        if (fields.size() != 4)
            throw std::invalid_argument("ingest_ratings: line " + std::to_string(line_no) +
                                        ": expected 4 fields, got " + std::to_string(fields.size()));
        double rating = 0.0, timestamp = 0.0;
        try {
            std::size_t used = 0;
            rating = std::stod(fields[2], &used);
            require(used == fields[2].size(), "trailing characters");
            timestamp = std::stod(fields[3], &used);
            require(used == fields[3].size(), "trailing characters");
        } catch (const std::exception&) {
            if (parsed_rows == 0 && line_no == 1) continue;  // optional header row
            throw std::invalid_argument("ingest_ratings: line " + std::to_string(line_no) +
                                        ": cannot parse rating/timestamp");
        }
        if (by_user.find(fields[0]) == by_user.end()) user_order.push_back(fields[0]);
        by_user[fields[0]].push_back({fields[1], rating, timestamp, parsed_rows});
        ++parsed_rows;
    }
    require(parsed_rows > 0, "ingest_ratings: no data rows");

    OfflineDataset data;
    data.meta.env_fingerprint = fnv1a(text);
    data.meta.behavior_policy = "ratings-ingest";
    data.meta.seed = 0;

    const int state_dim = cfg.window * cfg.embedding_dim;
    int episode = 0;
    for (const auto& user : user_order) {
        auto rows = by_user[user];
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
            return a.timestamp < b.timestamp;
        });
        if (rows.size() < 2) continue;

        auto window_state = [&](std::size_t upto) {  // entries [0, upto) fill the window tail
            Vec s = Vec::Zero(state_dim);
            const std::size_t have = std::min<std::size_t>(upto, cfg.window);
            for (std::size_t k = 0; k < have; ++k) {
                const Row& r = rows[upto - have + k];
                const int slot = cfg.window - static_cast<int>(have) + static_cast<int>(k);
                s.segment(slot * cfg.embedding_dim, cfg.embedding_dim) =
                    item_embedding(r.item, cfg.embedding_dim) * r.rating;
            }
            return s;
        };

        for (std::size_t i = 1; i < rows.size(); ++i) {
            Transition tr;
            tr.state = window_state(i);
            tr.action = item_embedding(rows[i].item, cfg.embedding_dim);
            tr.reward = rows[i].rating;
            tr.next_state = window_state(i + 1);
            tr.done = (i + 1 == rows.size());
            tr.episode_id = episode;
            tr.t = static_cast<int>(i - 1);
            data.transitions.push_back(std::move(tr));
        }
        ++episode;
    }
    data.validate();
    return data;
}

}  // namespace pgcr
