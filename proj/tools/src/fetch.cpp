#include "fetch.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <openssl/evp.h>
#include <zlib.h>

#include "safebocp/errors.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace safebocp::cli {

namespace fs = std::filesystem;

std::string md5_hex(const std::vector<unsigned char>& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_md5(), nullptr) != 1) {
        throw DataError("md5 digest failed");
    }
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        char buf[3];
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        out += buf;
    }
    return out;
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

std::vector<unsigned char> inflate_raw(const unsigned char* data, size_t size,
                                       size_t expected_size) {
    std::vector<unsigned char> out(expected_size);
    z_stream zs{};
    if (inflateInit2(&zs, -15) != Z_OK) throw DataError("zip: inflate initialization failed");
    zs.next_in = const_cast<unsigned char*>(data);
    zs.avail_in = static_cast<uInt>(size);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected_size) {
        throw DataError("zip: entry failed to decompress to its recorded size");
    }
    return out;
}

std::vector<unsigned char> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out.good()) throw DataError("write failed: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out.good()) throw DataError("write failed: " + path.string());
}

}  // namespace

std::vector<unsigned char> zip_extract(const std::vector<unsigned char>& archive,
                                       const std::string& name, const std::string& suffix) {
    constexpr size_t kEocdMin = 22;
    if (archive.size() < kEocdMin) throw DataError("zip: archive too small");

    // end-of-central-directory record: scan backwards, comment can pad the tail
    size_t scan_start = archive.size() >= kEocdMin + 65535 ? archive.size() - kEocdMin - 65535 : 0;
    size_t eocd = archive.size();
    for (size_t i = archive.size() - kEocdMin + 1; i-- > scan_start;) {
        if (archive[i] == 0x50 && archive[i + 1] == 0x4b && archive[i + 2] == 0x05 &&
            archive[i + 3] == 0x06) {
            eocd = i;
            break;
        }
    }
    if (eocd == archive.size()) throw DataError("zip: no end-of-central-directory record");
    std::uint16_t entries = read_u16(&archive[eocd + 10]);
    std::uint32_t cd_offset = read_u32(&archive[eocd + 16]);

    size_t pos = cd_offset;
    size_t fallback = archive.size();
    struct Entry {
        std::uint16_t method;
        std::uint32_t crc, comp_size, uncomp_size, local_offset;
    };
    Entry chosen{};
    bool found = false;
    for (std::uint16_t e = 0; e < entries; ++e) {
        if (pos + 46 > archive.size() || read_u32(&archive[pos]) != 0x02014b50) {
            throw DataError("zip: corrupt central directory");
        }
        Entry entry{read_u16(&archive[pos + 10]), read_u32(&archive[pos + 16]),
                    read_u32(&archive[pos + 20]), read_u32(&archive[pos + 24]),
                    read_u32(&archive[pos + 42])};
        std::uint16_t name_len = read_u16(&archive[pos + 28]);
        std::uint16_t extra_len = read_u16(&archive[pos + 30]);
        std::uint16_t comment_len = read_u16(&archive[pos + 32]);
        if (pos + 46 + name_len > archive.size()) throw DataError("zip: corrupt entry name");
        std::string entry_name(reinterpret_cast<const char*>(&archive[pos + 46]), name_len);
        if (entry_name == name) {
            chosen = entry;
            found = true;
            break;
        }
        if (fallback == archive.size() && entry_name.size() >= suffix.size() &&
            entry_name.compare(entry_name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            chosen = entry;
            fallback = pos;
        }
        pos += 46u + name_len + extra_len + comment_len;
    }
    if (!found && fallback == archive.size()) {
        throw DataError("zip: archive contains neither " + name + " nor any entry ending in " +
                        suffix);
    }

    size_t lh = chosen.local_offset;
    if (lh + 30 > archive.size() || read_u32(&archive[lh]) != 0x04034b50) {
        throw DataError("zip: corrupt local header");
    }
    size_t data = lh + 30u + read_u16(&archive[lh + 26]) + read_u16(&archive[lh + 28]);
    if (data + chosen.comp_size > archive.size()) throw DataError("zip: truncated entry data");

    std::vector<unsigned char> bytes;
    if (chosen.method == 0) {
        if (chosen.comp_size != chosen.uncomp_size) throw DataError("zip: bad stored entry");
        bytes.assign(archive.begin() + static_cast<std::ptrdiff_t>(data),
                     archive.begin() + static_cast<std::ptrdiff_t>(data + chosen.comp_size));
    } else if (chosen.method == 8) {
        bytes = inflate_raw(&archive[data], chosen.comp_size, chosen.uncomp_size);
    } else {
        throw DataError("zip: unsupported compression method " + std::to_string(chosen.method));
    }
    auto crc = static_cast<std::uint32_t>(
        crc32(0, bytes.empty() ? Z_NULL : bytes.data(), static_cast<uInt>(bytes.size())));
    if (crc != chosen.crc) throw DataError("zip: CRC mismatch on extracted entry");
    return bytes;
}

int cmd_fetch_data(const FetchOptions& options) {
    if (options.dataset != "ml-100k") {
        throw ConfigError("unknown dataset " + options.dataset + "; only ml-100k is supported");
    }
    fs::path dest(options.dest_dir);
    fs::path data_path = dest / "u.data";
    fs::path sidecar = dest / "u.data.md5";
    fs::path zip_path = dest / "ml-100k.zip";

    std::error_code ec;
    fs::create_directories(dest, ec);
    if (ec) throw DataError("cannot create " + dest.string() + ": " + ec.message());

    if (fs::exists(data_path) && fs::exists(sidecar)) {
        std::vector<unsigned char> current = read_file(data_path);
        std::vector<unsigned char> recorded = read_file(sidecar);
        std::string want(recorded.begin(), recorded.end());
        while (!want.empty() && (want.back() == '\n' || want.back() == '\r')) want.pop_back();
        if (md5_hex(current) == want) {
            std::cout << "already present: " << data_path.string() << "\n";
            return 0;
        }
        std::cerr << "checksum drift on " << data_path.string() << "; re-extracting\n";
    }

    if (!fs::exists(zip_path)) {
        std::string url = options.url;
        auto split = url.find('/', url.find("//") == std::string::npos ? 0 : url.find("//") + 2);
        if (split == std::string::npos) throw ConfigError("malformed url: " + url);
        std::string origin = url.substr(0, split);
        std::string path = url.substr(split);
        httplib::Client client(origin);
        client.set_follow_location(true);
        client.set_connection_timeout(20);
        client.set_read_timeout(120);
        std::cout << "downloading " << url << "\n";
        httplib::Result res = client.Get(path);
        if (!res || res->status != 200) {
            std::cerr << "download failed (" << (res ? std::to_string(res->status)
                                                     : httplib::to_string(res.error()))
                      << "); place the archive at " << zip_path.string()
                      << " and rerun, or pre-place " << data_path.string() << "\n";
            return 3;
        }
        std::vector<unsigned char> body(res->body.begin(), res->body.end());
        write_file(zip_path, body);
    }

    std::vector<unsigned char> archive = read_file(zip_path);
    std::string digest = md5_hex(archive);
    if (digest != options.md5) {
        fs::path quarantine = zip_path;
        quarantine += ".quarantine";
        fs::rename(zip_path, quarantine, ec);
        std::cerr << "checksum mismatch on " << zip_path.string() << " (got " << digest
                  << ", expected " << options.md5 << "); moved to " << quarantine.string() << "\n";
        return 3;
    }

    std::vector<unsigned char> data = zip_extract(archive, "ml-100k/u.data", "u.data");
    write_file(data_path, data);
    write_text(sidecar, md5_hex(data) + "\n");
    std::cout << "extracted " << data_path.string() << " (" << data.size() << " bytes)\n";
    return 0;
}

}  // namespace safebocp::cli
