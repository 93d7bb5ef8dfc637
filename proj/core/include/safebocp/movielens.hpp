#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace safebocp {

struct Rating {
    int user;
    int movie;
    int value;  // 1..5
};

struct IngestReport {
    std::int64_t lines_read = 0;
    std::int64_t rows_kept = 0;
    std::int64_t duplicates_replaced = 0;
    std::vector<std::int64_t> malformed_lines;  // 1-based line numbers of rejected rows
};

// Canonicalized rating triples: duplicate (user, movie) pairs resolve last-wins
// in file order, then everything is sorted by (user, movie) so permuted input
// files produce identical tables.
struct RatingsTable {
    std::vector<Rating> ratings;
    std::vector<int> users;   // distinct ids, ascending
    std::vector<int> movies;  // distinct ids, ascending
    IngestReport report;
};

// Tab-separated "user<TAB>movie<TAB>rating<TAB>timestamp" rows. Rows that do
// not parse, or whose rating falls outside 1..5, are rejected and recorded by
// line number. Throws on an unreadable file or when no valid row remains.
RatingsTable ingest(const std::string& path);

struct FactorizeOptions {
    int rank = 20;
    double regularization = 0.1;
    int sweeps = 50;
    std::uint64_t seed = 1;
};

struct FactorizationModel {
    Eigen::MatrixXd movie_features;   // one row per table movie; zero when no training user rated it
    Eigen::MatrixXd user_features;    // one row per training user
    std::vector<int> movies;          // ids aligned with movie_features rows
    std::vector<int> training_users;  // ids aligned with user_features rows
    FactorizeOptions options;
    double train_rmse = 0.0;
};

// Alternating ridge regressions on the observed entries, restricted to ratings
// by training users. Deterministic per seed: fixed sweep order, seeded movie
// initialization.
FactorizationModel factorize(const RatingsTable& table, const std::vector<int>& training_users,
                             const FactorizeOptions& options);

// Seeded uniform draw of `count` distinct user ids.
std::vector<int> select_training_users(const RatingsTable& table, int count, std::uint64_t seed);

// Up to `count` users outside the training set with the most rated movies,
// among those with at least two ratings and at least one rating of exactly 4;
// ordered by rating count descending, ties by ascending id.
std::vector<int> select_test_users(const RatingsTable& table,
                                   const std::vector<int>& training_users, int count);

struct UserBlackBoxData {
    int user = 0;
    Eigen::MatrixXd points;       // kept movies' feature rows
    Eigen::VectorXd values;       // rating - 4 per kept movie (objective = constraint)
    std::vector<int> movie_ids;   // kept movie id per row
    int seed_safe_index = 0;      // row of the drawn rating-4 movie
};

// Candidate data for one test user: feature vectors of the movies they rated.
// Movies with coincident feature vectors keep only the lowest movie id. The
// seed-safe movie is a seeded draw among kept movies rated exactly 4; returns
// nothing when the user has no such movie (caller skips the user).
std::optional<UserBlackBoxData> build_user_blackbox(const FactorizationModel& model,
                                                    const RatingsTable& table, int user,
                                                    std::uint64_t seed);

}  // namespace safebocp
