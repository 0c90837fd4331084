#pragma once

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "profgen/binio.hpp"
#include "profgen/errors.hpp"
#include "profgen/pipeline.hpp"

namespace profgen {

// Wire protocol: every frame is a u32 little-endian payload length followed
// by the payload. Requests carry a type byte (1 = search, 255 = shutdown),
// a block of key=value override lines terminated by one empty line, then
// the FASTA payload. Responses carry a status byte (0 = ok, 2 = malformed
// request, 3 = frame too large); ok search responses carry a file count and
// (name length, name, content length, content) entries, error responses a
// message string.
namespace daemonwire {
inline constexpr uint8_t kTypeSearch = 1;
inline constexpr uint8_t kTypeShutdown = 255;
inline constexpr uint8_t kStatusOk = 0;
inline constexpr uint8_t kStatusMalformed = 2;
inline constexpr uint8_t kStatusOversized = 3;
inline constexpr size_t kDefaultFrameCap = 256ull << 20;
}  // namespace daemonwire

struct NamedPayload {
    std::string name;
    std::string content;

    bool operator==(const NamedPayload&) const = default;
};

namespace detail {

class Socket {
public:
    explicit Socket(int fd = -1) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close_fd();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

    void send_all(const void* data, size_t len) const {
        const char* p = static_cast<const char*>(data);
        while (len > 0) {
            const ssize_t n = ::send(fd_, p, len, MSG_NOSIGNAL);
            if (n <= 0) throw InputError("socket send failed");
            p += n;
            len -= static_cast<size_t>(n);
        }
    }

    // False on clean EOF before the first byte.
    bool recv_exact(void* data, size_t len) const {
        char* p = static_cast<char*>(data);
        size_t got = 0;
        while (got < len) {
            const ssize_t n = ::recv(fd_, p + got, len - got, 0);
            if (n == 0) {
                if (got == 0) return false;
                throw InputError("socket closed mid-frame");
            }
            if (n < 0) throw InputError("socket recv failed");
            got += static_cast<size_t>(n);
        }
        return true;
    }

private:
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_;
};

inline sockaddr_un make_address(const std::filesystem::path& socket_path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    const std::string s = socket_path.string();
    if (s.size() >= sizeof(addr.sun_path))
        throw InputError("socket path too long: " + s);
    std::memcpy(addr.sun_path, s.c_str(), s.size() + 1);
    return addr;
}

inline void send_frame(const Socket& sock, const std::string& payload) {
    const auto len = static_cast<uint32_t>(payload.size());
    sock.send_all(&len, sizeof len);
    sock.send_all(payload.data(), payload.size());
}

inline bool recv_frame(const Socket& sock, std::string& payload, size_t cap, bool& oversized) {
    uint32_t len = 0;
    oversized = false;
    if (!sock.recv_exact(&len, sizeof len)) return false;
    if (len > cap) {
        oversized = true;
        // Drain so the error response is not interleaved with stale bytes.
        std::vector<char> sink(64 * 1024);
        size_t left = len;
        while (left > 0) {
            const size_t chunk = std::min(left, sink.size());
            if (!sock.recv_exact(sink.data(), chunk)) break;
            left -= chunk;
        }
        return true;
    }
    payload.resize(len);
    if (len > 0 && !sock.recv_exact(payload.data(), len)) throw InputError("truncated frame");
    return true;
}

inline void apply_override(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "max_seqs")
        cfg.max_seqs = std::stoul(value);
    else if (key == "evalue")
        cfg.inclusion_evalue = std::stod(value);
    else if (key == "min_ungapped_score")
        cfg.min_ungapped_score = std::stoi(value);
    else if (key == "workers")
        cfg.workers = static_cast<unsigned>(std::stoul(value));
    else if (key == "out")
        cfg.outputs = OutputSelection::parse(value);
    else if (key == "band")
        cfg.band_width = std::stoi(value);
    else if (key == "similar_kmer_threshold")
        cfg.similar_kmer_threshold = std::stoi(value);
    else if (key == "pseudocount_beta")
        cfg.pseudocount_beta = std::stod(value);
    else if (key == "iterations")
        cfg.iterations = std::stoi(value);
    else
        throw InputError("unknown config key '" + key + "'");
}

inline std::vector<NamedPayload> collect_tree(const std::filesystem::path& root) {
    std::vector<NamedPayload> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        files.push_back({entry.path().lexically_relative(root).generic_string(),
                         read_text_file(entry.path())});
    }
    std::sort(files.begin(), files.end(),
              [](const NamedPayload& a, const NamedPayload& b) { return a.name < b.name; });
    return files;
}

inline std::string pack_files(const std::vector<NamedPayload>& files) {
    BinWriter w;
    w.put<uint8_t>(daemonwire::kStatusOk);
    w.put<uint32_t>(static_cast<uint32_t>(files.size()));
    for (const auto& f : files) {
        w.put_string(f.name);
        w.put<uint32_t>(static_cast<uint32_t>(f.content.size()));
        w.put_bytes(f.content.data(), f.content.size());
    }
    return {reinterpret_cast<const char*>(w.bytes().data()),
            reinterpret_cast<const char*>(w.bytes().data()) + w.size()};
}

inline std::string pack_error(uint8_t status, const std::string& message) {
    BinWriter w;
    w.put<uint8_t>(status);
    w.put_string(message);
    return {reinterpret_cast<const char*>(w.bytes().data()),
            reinterpret_cast<const char*>(w.bytes().data()) + w.size()};
}

}  // namespace detail

struct DaemonOptions {
    size_t frame_cap = daemonwire::kDefaultFrameCap;
};

// Loads the index once, then answers search frames until a shutdown frame
// arrives. Requests are served one at a time; the response always belongs
// to the request frame that produced it.
inline void daemon_serve(const std::filesystem::path& index_dir,
                         const std::filesystem::path& socket_path,
                         const PipelineConfig& base_cfg = {}, const DaemonOptions& opts = {}) {
    const auto [db, idx] = load_index(index_dir);

    detail::Socket server(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (!server.valid()) throw InternalError("cannot create socket");
    std::filesystem::remove(socket_path);
    auto addr = detail::make_address(socket_path);
    if (::bind(server.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw InputError("cannot bind socket '" + socket_path.string() + "'");
    if (::listen(server.fd(), 8) != 0) throw InternalError("listen failed");

    bool running = true;
    while (running) {
        detail::Socket conn(::accept(server.fd(), nullptr, nullptr));
        if (!conn.valid()) continue;
        std::string payload;
        bool oversized = false;
        while (running) {
            try {
                if (!detail::recv_frame(conn, payload, opts.frame_cap, oversized)) break;
            } catch (const Error&) {
                break;  // connection died mid-frame
            }
            if (oversized) {
                detail::send_frame(conn, detail::pack_error(daemonwire::kStatusOversized,
                                                            "frame exceeds configured cap"));
                break;
            }
            if (payload.empty()) {
                detail::send_frame(conn, detail::pack_error(daemonwire::kStatusMalformed,
                                                            "empty frame"));
                break;
            }
            const uint8_t type = static_cast<uint8_t>(payload[0]);
            if (type == daemonwire::kTypeShutdown) {
                detail::send_frame(conn, detail::pack_files({}));
                running = false;
                break;
            }
            if (type != daemonwire::kTypeSearch) {
                detail::send_frame(conn, detail::pack_error(daemonwire::kStatusMalformed,
                                                            "unknown message type"));
                break;
            }
            try {
                // Config lines end at the first empty line; FASTA follows.
                size_t pos = 1;
                PipelineConfig cfg = base_cfg;
                cfg.k = idx.k;
                for (;;) {
                    const size_t eol = payload.find('\n', pos);
                    if (eol == std::string::npos)
                        throw InputError("missing empty line after config block");
                    const std::string line = payload.substr(pos, eol - pos);
                    pos = eol + 1;
                    if (line.empty()) break;
                    const size_t eq = line.find('=');
                    if (eq == std::string::npos)
                        throw InputError("config line without '=': " + line);
                    detail::apply_override(cfg, line.substr(0, eq), line.substr(eq + 1));
                }

                std::istringstream fasta(payload.substr(pos));
                size_t normalized = 0;
                const auto queries = parse_fasta(fasta, &normalized);

                TempDir workdir("profgen_daemon_");
                cfg.workdir = workdir.path();
                run_pipeline_loaded(db, idx, queries, cfg, /*index_load_ms=*/0, normalized);
                detail::send_frame(conn, detail::pack_files(detail::collect_tree(workdir.path())));
            } catch (const std::exception& e) {
                detail::send_frame(conn,
                                   detail::pack_error(daemonwire::kStatusMalformed, e.what()));
                break;
            }
        }
    }
    std::filesystem::remove(socket_path);
}

// One search round-trip against a running daemon.
inline std::vector<NamedPayload> daemon_query(const std::filesystem::path& socket_path,
                                              const std::string& fasta_payload,
                                              const std::string& config_lines = {}) {
    detail::Socket sock(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (!sock.valid()) throw InternalError("cannot create socket");
    auto addr = detail::make_address(socket_path);
    if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw InputError("cannot connect to daemon at '" + socket_path.string() + "'");

    std::string payload;
    payload.push_back(static_cast<char>(daemonwire::kTypeSearch));
    payload += config_lines;
    if (!config_lines.empty() && config_lines.back() != '\n') payload.push_back('\n');
    payload.push_back('\n');
    payload += fasta_payload;
    detail::send_frame(sock, payload);

    std::string response;
    bool oversized = false;
    if (!detail::recv_frame(sock, response, daemonwire::kDefaultFrameCap, oversized) || oversized)
        throw InputError("daemon closed the connection");
    BinReader r(reinterpret_cast<const uint8_t*>(response.data()), response.size(),
                "daemon response");
    const auto status = r.get<uint8_t>();
    if (status != daemonwire::kStatusOk)
        throw InputError("daemon error (status " + std::to_string(status) + "): " +
                         r.get_string());
    const auto count = r.get<uint32_t>();
    std::vector<NamedPayload> files(count);
    for (auto& f : files) {
        f.name = r.get_string();
        const auto len = r.get<uint32_t>();
        f.content.resize(len);
        if (len > 0) {
            auto bytes = r.get_array<char>(len);
            f.content.assign(bytes.begin(), bytes.end());
        }
    }
    return files;
}

inline void daemon_shutdown(const std::filesystem::path& socket_path) {
    detail::Socket sock(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (!sock.valid()) throw InternalError("cannot create socket");
    auto addr = detail::make_address(socket_path);
    if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw InputError("cannot connect to daemon at '" + socket_path.string() + "'");
    std::string payload(1, static_cast<char>(daemonwire::kTypeShutdown));
    detail::send_frame(sock, payload);
    std::string response;
    bool oversized = false;
    detail::recv_frame(sock, response, daemonwire::kDefaultFrameCap, oversized);
}

}  // namespace profgen
