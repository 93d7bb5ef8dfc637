#include "safebocp/movielens.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "safebocp/errors.hpp"
#include "safebocp/rng.hpp"

namespace safebocp {

namespace {

bool parse_int(const std::string& field, long long& out) {
    if (field.empty()) return false;
    size_t pos = 0;
    try {
        out = std::stoll(field, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == field.size();
}

bool parse_row(const std::string& line, Rating& out) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    if (fields.size() != 4) return false;
    long long user = 0, movie = 0, rating = 0, stamp = 0;
    if (!parse_int(fields[0], user) || !parse_int(fields[1], movie) ||
        !parse_int(fields[2], rating) || !parse_int(fields[3], stamp)) {
        return false;
    }
    if (user < 1 || movie < 1) return false;
    if (rating < 1 || rating > 5) return false;
    out = Rating{static_cast<int>(user), static_cast<int>(movie), static_cast<int>(rating)};
    return true;
}

}  // namespace

RatingsTable ingest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("ratings file is not readable: " + path);

    RatingsTable table;
    std::map<std::pair<int, int>, int> cell;  // (user, movie) -> value, last wins
    std::string line;
    while (std::getline(in, line)) {
        ++table.report.lines_read;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        Rating r{};
        if (!parse_row(line, r)) {
            table.report.malformed_lines.push_back(table.report.lines_read);
            continue;
        }
        auto [it, inserted] = cell.insert_or_assign({r.user, r.movie}, r.value);
        (void)it;
        if (!inserted) ++table.report.duplicates_replaced;
    }
    if (cell.empty()) throw DataError("ratings file has no valid rows: " + path);

    std::set<int> users, movies;
    table.ratings.reserve(cell.size());
    for (const auto& [key, value] : cell) {
        table.ratings.push_back(Rating{key.first, key.second, value});
        users.insert(key.first);
        movies.insert(key.second);
    }
    table.report.rows_kept = static_cast<std::int64_t>(table.ratings.size());
    table.users.assign(users.begin(), users.end());
    table.movies.assign(movies.begin(), movies.end());
    return table;
}

FactorizationModel factorize(const RatingsTable& table, const std::vector<int>& training_users,
                             const FactorizeOptions& options) {
    if (options.rank < 1) throw ConfigError("factorize: rank must be at least 1");
    if (!(options.regularization > 0.0)) {
        throw ConfigError("factorize: regularization must be positive");
    }
    if (options.sweeps < 1) throw ConfigError("factorize: sweeps must be at least 1");

    std::set<int> train_set(training_users.begin(), training_users.end());
    for (int u : train_set) {
        if (!std::binary_search(table.users.begin(), table.users.end(), u)) {
            throw ConfigError("factorize: training user absent from the table: " +
                              std::to_string(u));
        }
    }

    std::unordered_map<int, int> movie_row;
    for (size_t m = 0; m < table.movies.size(); ++m) {
        movie_row[table.movies[m]] = static_cast<int>(m);
    }
    std::vector<int> train_ids(train_set.begin(), train_set.end());
    std::unordered_map<int, int> user_row;
    for (size_t u = 0; u < train_ids.size(); ++u) user_row[train_ids[u]] = static_cast<int>(u);

    // observed training entries grouped both ways, ids ascending via table order
    std::vector<std::vector<std::pair<int, double>>> by_user(train_ids.size());
    std::vector<std::vector<std::pair<int, double>>> by_movie(table.movies.size());
    std::set<int> trained_movies;
    for (const Rating& r : table.ratings) {
        auto u = user_row.find(r.user);
        if (u == user_row.end()) continue;
        int m = movie_row.at(r.movie);
        by_user[static_cast<size_t>(u->second)].push_back({m, static_cast<double>(r.value)});
        by_movie[static_cast<size_t>(m)].push_back({u->second, static_cast<double>(r.value)});
        trained_movies.insert(r.movie);
    }
    if (static_cast<int>(train_ids.size()) < options.rank ||
        static_cast<int>(trained_movies.size()) < options.rank) {
        throw DataError("factorize: need at least rank (" + std::to_string(options.rank) +
                        ") distinct training users and movies; have " +
                        std::to_string(train_ids.size()) + " users and " +
                        std::to_string(trained_movies.size()) + " movies");
    }

    const int d = options.rank;
    const double lambda = options.regularization;
    FactorizationModel model;
    model.movies = table.movies;
    model.training_users = train_ids;
    model.options = options;
    model.movie_features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.movies.size()), d);
    model.user_features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(train_ids.size()), d);

    Rng rng(options.seed);
    double init_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (size_t m = 0; m < table.movies.size(); ++m) {
        if (!trained_movies.count(table.movies[m])) continue;  // untrained movies stay zero
        for (int k = 0; k < d; ++k) {
            model.movie_features(static_cast<Eigen::Index>(m), k) = init_scale * rng.normal();
        }
    }

    Eigen::MatrixXd reg = lambda * Eigen::MatrixXd::Identity(d, d);
    auto solve_side = [&](Eigen::MatrixXd& target, const Eigen::MatrixXd& fixed,
                          const std::vector<std::vector<std::pair<int, double>>>& entries) {
        for (size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].empty()) continue;
            Eigen::MatrixXd a = reg;
            Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
            for (const auto& [j, value] : entries[i]) {
                const auto row = fixed.row(j);
                a.noalias() += row.transpose() * row;
                b.noalias() += value * row.transpose();
            }
            target.row(static_cast<Eigen::Index>(i)) = a.llt().solve(b).transpose();
        }
    };

    double sse = 0.0;
    std::int64_t n_obs = 0;
    for (int sweep = 0; sweep < options.sweeps; ++sweep) {
        solve_side(model.user_features, model.movie_features, by_user);
        solve_side(model.movie_features, model.user_features, by_movie);
        sse = 0.0;
        n_obs = 0;
        for (size_t u = 0; u < by_user.size(); ++u) {
            for (const auto& [m, value] : by_user[u]) {
                double err = value - model.user_features.row(static_cast<Eigen::Index>(u))
                                         .dot(model.movie_features.row(m));
                sse += err * err;
                ++n_obs;
            }
        }
        if (!std::isfinite(sse)) throw DataError("factorize: training loss diverged");
    }
    model.train_rmse = n_obs > 0 ? std::sqrt(sse / static_cast<double>(n_obs)) : 0.0;
    return model;
}

std::vector<int> select_training_users(const RatingsTable& table, int count, std::uint64_t seed) {
    if (count < 1) throw ConfigError("select_training_users: count must be positive");
    if (count > static_cast<int>(table.users.size())) {
        throw DataError("select_training_users: requested " + std::to_string(count) +
                        " users but the table has " + std::to_string(table.users.size()));
    }
    // seeded partial Fisher-Yates over the ascending user list
    std::vector<int> pool = table.users;
    Rng rng(seed);
    std::vector<int> chosen;
    chosen.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        size_t remaining = pool.size() - static_cast<size_t>(i);
        size_t pick = static_cast<size_t>(i) + static_cast<size_t>(rng.next_u64() % remaining);
        std::swap(pool[static_cast<size_t>(i)], pool[pick]);
        chosen.push_back(pool[static_cast<size_t>(i)]);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::vector<int> select_test_users(const RatingsTable& table,
                                   const std::vector<int>& training_users, int count) {
    if (count < 1) throw ConfigError("select_test_users: count must be positive");
    std::set<int> train_set(training_users.begin(), training_users.end());
    std::map<int, std::pair<int, bool>> stats;  // user -> (ratings, has exact 4)
    for (const Rating& r : table.ratings) {
        if (train_set.count(r.user)) continue;
        auto& s = stats[r.user];
        ++s.first;
        if (r.value == 4) s.second = true;
    }
    std::vector<std::pair<int, int>> eligible;  // (-count, id) for one-pass ordering
    for (const auto& [user, s] : stats) {
        if (s.first >= 2 && s.second) eligible.push_back({-s.first, user});
    }
    std::sort(eligible.begin(), eligible.end());
    std::vector<int> out;
    for (const auto& [neg, user] : eligible) {
        if (static_cast<int>(out.size()) == count) break;
        out.push_back(user);
    }
    return out;
}

std::optional<UserBlackBoxData> build_user_blackbox(const FactorizationModel& model,
                                                    const RatingsTable& table, int user,
                                                    std::uint64_t seed) {
    if (std::binary_search(model.training_users.begin(), model.training_users.end(), user)) {
        throw ConfigError("user_blackbox: user " + std::to_string(user) +
                          " belongs to the training split");
    }
    std::unordered_map<int, int> movie_row;
    for (size_t m = 0; m < model.movies.size(); ++m) movie_row[model.movies[m]] = static_cast<int>(m);

    std::vector<Rating> rated;  // ascending movie id via table canonical order
    for (const Rating& r : table.ratings) {
        if (r.user == user) rated.push_back(r);
    }
    if (rated.size() < 2) {
        throw DataError("user_blackbox: user " + std::to_string(user) +
                        " has fewer than two rated movies");
    }

    UserBlackBoxData data;
    data.user = user;
    std::vector<Eigen::VectorXd> kept;
    std::vector<int> kept_values;
    for (const Rating& r : rated) {
        Eigen::VectorXd x = model.movie_features.row(movie_row.at(r.movie)).transpose();
        bool duplicate = false;
        for (const Eigen::VectorXd& prev : kept) {
            if ((prev - x).squaredNorm() <= 1e-24) {  // coincident: keep the lowest movie id
                duplicate = true;
                break;
            }
        }
        if (duplicate) continue;
        kept.push_back(std::move(x));
        kept_values.push_back(r.value);
        data.movie_ids.push_back(r.movie);
    }

    std::vector<int> fours;
    for (size_t i = 0; i < kept_values.size(); ++i) {
        if (kept_values[i] == 4) fours.push_back(static_cast<int>(i));
    }
    if (fours.empty()) return std::nullopt;
    Rng rng(seed);
    data.seed_safe_index = fours[static_cast<size_t>(rng.next_u64() % fours.size())];

    data.points.resize(static_cast<Eigen::Index>(kept.size()), model.movie_features.cols());
    data.values.resize(static_cast<Eigen::Index>(kept.size()));
    for (size_t i = 0; i < kept.size(); ++i) {
        data.points.row(static_cast<Eigen::Index>(i)) = kept[i].transpose();
        data.values(static_cast<Eigen::Index>(i)) = static_cast<double>(kept_values[i]) - 4.0;
    }
    return data;
}

}  // namespace safebocp
