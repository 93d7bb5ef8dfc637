#pragma once

#include <string>
#include <vector>

namespace safebocp::cli {

struct FetchOptions {
    std::string dataset = "ml-100k";
    std::string dest_dir;  // resolved by the caller
    std::string url = "https://files.grouplens.org/datasets/movielens/ml-100k.zip";
    std::string md5 = "0e33842e24a9c977be4e0107933c0723";
};

// Lowercase hex MD5 of a byte buffer.
std::string md5_hex(const std::vector<unsigned char>& bytes);

// Extracts one file from a zip archive buffer: the entry named `name`, or if
// absent the first entry whose path ends with `suffix`. Handles stored and
// deflated entries and verifies the recorded CRC. Throws DataError on any
// structural problem.
std::vector<unsigned char> zip_extract(const std::vector<unsigned char>& archive,
                                       const std::string& name, const std::string& suffix);

// Ensure dest_dir/u.data exists and is verified; see the command help text for
// the exact decision sequence. Returns a process exit code (0 or 3).
int cmd_fetch_data(const FetchOptions& options);

}  // namespace safebocp::cli
