#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "marshal/backends.hpp"
#include "marshal/digest.hpp"

namespace marshal {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void put_field(std::string& out, std::string_view name, std::string_view value) {
    out += name;
    out += '=';
    out += std::to_string(value.size());
    out += ':';
    out += value;
    out += '\n';
}

}  // namespace

// Canonical serialization, version 1. Each field is "<name>=<byte length>:<bytes>\n";
// image parts contribute their media type and the SHA-256 of their bytes.
std::string cache_key(const std::string& backend_id, const std::string& model_name, const ModelRequest& request) {
    std::string canon = "marshal.cache.v1\n";
    put_field(canon, "backend_id", backend_id);
    put_field(canon, "model", model_name);
    put_field(canon, "system", request.system_text);
    for (const auto& part : request.user_parts) {
        if (const auto* t = std::get_if<TextPart>(&part)) {
            put_field(canon, "part.text", t->text);
        } else {
            const auto& img = std::get<ImagePart>(part);
            if (!img.bytes.empty()) {
                put_field(canon, "part.image", img.media_type + ";sha256=" + sha256_hex(img.bytes));
            } else {
                put_field(canon, "part.image", img.media_type + ";ref=" + img.path);
            }
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "temperature=%.6f\n", request.decoding.temperature);
    canon += buf;
    canon += "max_tokens=" + std::to_string(request.decoding.max_tokens) + "\n";
    return sha256_hex(canon);
}

std::string cache_key(const BackendSpec& spec, const ModelRequest& request) {
    return cache_key(spec.id, spec.model_name, request);
}

CacheStore::CacheStore(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
        throw Error(Errc::CacheIoError, "cannot create cache directory " + dir_.string() + ": " + ec.message());
    }
    if (::access(dir_.c_str(), W_OK | R_OK) != 0) {
        throw Error(Errc::CacheIoError, "cache directory is not readable and writable: " + dir_.string());
    }
}

fs::path CacheStore::path_for(const std::string& key) const { return dir_ / (key + ".resp"); }

std::optional<ModelResponse> CacheStore::get(const std::string& key) const {
    const fs::path p = path_for(key);
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        if (fs::exists(p)) throw Error(Errc::CacheIoError, "cannot read cache entry " + p.string());
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        const json doc = json::parse(buf.str());
        return ModelResponse{doc.at("text").get<std::string>(), doc.at("latency_ms").get<std::int64_t>(),
                             doc.at("backend_id").get<std::string>(), true};
    } catch (const json::exception& e) {
        throw Error(Errc::CacheIoError, "corrupt cache entry " + p.string() + ": " + e.what());
    }
}

ModelResponse CacheStore::put(const std::string& key, const ModelResponse& response) const {
    static std::atomic<std::uint64_t> counter{0};
    const fs::path final_path = path_for(key);
    std::ostringstream tmp_name;
    tmp_name << key << ".tmp." << ::getpid() << '.' << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.'
             << counter.fetch_add(1);
    const fs::path tmp = dir_ / tmp_name.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::CacheIoError, "cannot write cache entry " + tmp.string());
        out << json{{"backend_id", response.backend_id}, {"latency_ms", response.latency_ms}, {"text", response.text}}.dump();
        if (!out.flush()) throw Error(Errc::CacheIoError, "short write on " + tmp.string());
    }
    // link() refuses to overwrite, so the first persisted entry for a key wins.
    const int rc = ::link(tmp.c_str(), final_path.c_str());
    const int link_errno = errno;
    std::error_code ec;
    fs::remove(tmp, ec);
    if (rc != 0 && link_errno != EEXIST) {
        throw Error(Errc::CacheIoError, "cannot publish cache entry " + final_path.string());
    }
    auto stored = get(key);
    if (!stored) throw Error(Errc::CacheIoError, "cache entry vanished: " + final_path.string());
    return *stored;
}

std::size_t CacheStore::entry_count() const {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.path().extension() == ".resp") ++n;
    }
    return n;
}

std::size_t CacheStore::clear() const {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.path().extension() == ".resp") {
            fs::remove(e.path());
            ++n;
        }
    }
    return n;
}

}  // namespace marshal
