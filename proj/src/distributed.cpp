#include "epipair/distributed.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <bit>
#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>

#include "epipair/errors.hpp"
#include "epipair/text_io.hpp"

namespace epipair {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr std::uint32_t kLabelsBlock = 0xFFFFFFFFu;
constexpr std::size_t kResultsPerBlock = 4096;
// Workers compute and stream in chunks so the coordinator never waits on a
// silent connection for longer than one chunk's compute time.
constexpr std::uint64_t kWorkerChunkTasks = 65536;
constexpr std::uint32_t kMaxFrameBytes = 1u << 30;

struct Socket {
    int fd = -1;
    Socket() = default;
    explicit Socket(int f) : fd(f) {}
    Socket(Socket&& other) noexcept : fd(other.fd) { other.fd = -1; }
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_now();
            fd = other.fd;
            other.fd = -1;
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close_now(); }
    void close_now() {
        if (fd >= 0) {
            ::close(fd);
            fd = -1;
        }
    }
};

void set_recv_timeout(int fd, double seconds) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(seconds);
    tv.tv_usec = static_cast<suseconds_t>((seconds - static_cast<double>(tv.tv_sec)) * 1e6);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

void send_all(int fd, const void* data, std::size_t len) {
    const char* p = static_cast<const char*>(data);
    while (len > 0) {
        const ssize_t n = ::send(fd, p, len, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw WorkerLost(std::string("send failed: ") + std::strerror(errno));
        }
        p += n;
        len -= static_cast<std::size_t>(n);
    }
}

// Returns false on orderly EOF at a message boundary (allowed only when the
// caller says so); throws on timeouts, resets, and mid-message EOF.
bool recv_exact(int fd, void* data, std::size_t len, bool eof_ok) {
    char* p = static_cast<char*>(data);
    std::size_t got = 0;
    while (got < len) {
        const ssize_t n = ::recv(fd, p + got, len - got, 0);
        if (n == 0) {
            if (got == 0 && eof_ok)
                return false;
            throw WorkerLost("connection closed mid-message");
        }
        if (n < 0) {
            if (errno == EINTR)
                continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK)
                throw Timeout("no message within the idle deadline");
            throw WorkerLost(std::string("recv failed: ") + std::strerror(errno));
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

// ---- body encoding ---------------------------------------------------------

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(static_cast<char>((v >> shift) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<char>((v >> shift) & 0xFF));
}

void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_str(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

struct Reader {
    const unsigned char* p;
    std::size_t n;

    explicit Reader(std::string_view body)
        : p(reinterpret_cast<const unsigned char*>(body.data())), n(body.size()) {}

    void need(std::size_t want) const {
        if (n < want)
            throw ProtocolError("truncated message body");
    }
    std::uint8_t u8() {
        need(1);
        const std::uint8_t v = p[0];
        p += 1;
        n -= 1;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v = (v << 8) | p[i];
        p += 4;
        n -= 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v = (v << 8) | p[i];
        p += 8;
        n -= 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t len = u32();
        need(len);
        std::string s(reinterpret_cast<const char*>(p), len);
        p += len;
        n -= len;
        return s;
    }
    void done() const {
        if (n != 0)
            throw ProtocolError("trailing bytes in message body");
    }
};

void send_msg(int fd, MsgKind kind, std::string_view body) {
    std::string frame;
    frame.reserve(5 + body.size());
    put_u32(frame, static_cast<std::uint32_t>(1 + body.size()));
    put_u8(frame, static_cast<std::uint8_t>(kind));
    frame.append(body);
    send_all(fd, frame.data(), frame.size());
}

struct Message {
    MsgKind kind;
    std::string body;
};

std::optional<Message> recv_msg(int fd, bool eof_ok = false) {
    unsigned char header[4];
    if (!recv_exact(fd, header, 4, eof_ok))
        return std::nullopt;
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i)
        len = (len << 8) | header[i];
    if (len == 0 || len > kMaxFrameBytes)
        throw ProtocolError("bad frame length " + std::to_string(len));
    Message msg;
    msg.body.resize(len);
    recv_exact(fd, msg.body.data(), len, false);
    msg.kind = static_cast<MsgKind>(static_cast<unsigned char>(msg.body[0]));
    msg.body.erase(0, 1);
    return msg;
}

[[noreturn]] void abort_session(int fd, const std::string& reason) {
    try {
        std::string body;
        put_str(body, reason);
        send_msg(fd, MsgKind::Abort, body);
    } catch (...) {
        // the peer is already gone; the throw below still reports why
    }
    throw ProtocolError(reason);
}

// ---- shared run description ------------------------------------------------

struct AssignBody {
    std::uint32_t worker_id = 0;
    std::uint32_t thread_override = 0;
    DistributionMode mode = DistributionMode::ShipOnRun;
    PairMode pair_mode = PairMode::CrossProduct;
    MdrConfig mdr;
    std::string labels_name;
    std::vector<std::string> file_names;
};

std::string encode_assign(const AssignBody& a) {
    std::string body;
    put_u32(body, a.worker_id);
    put_u32(body, a.thread_override);
    put_u8(body, static_cast<std::uint8_t>(a.mode));
    put_u8(body, static_cast<std::uint8_t>(a.pair_mode));
    put_u32(body, static_cast<std::uint32_t>(a.mdr.k));
    put_f64(body, a.mdr.top_fraction);
    put_u8(body, static_cast<std::uint8_t>(a.mdr.empty_cell_policy));
    put_u8(body, static_cast<std::uint8_t>(a.mdr.tie_policy));
    put_u8(body, static_cast<std::uint8_t>(a.mdr.kernel));
    put_u64(body, a.mdr.seed);
    put_str(body, a.labels_name);
    put_u32(body, static_cast<std::uint32_t>(a.file_names.size()));
    for (const std::string& name : a.file_names)
        put_str(body, name);
    return body;
}

AssignBody decode_assign(std::string_view body) {
    Reader r(body);
    AssignBody a;
    a.worker_id = r.u32();
    a.thread_override = r.u32();
    a.mode = static_cast<DistributionMode>(r.u8());
    a.pair_mode = static_cast<PairMode>(r.u8());
    a.mdr.k = static_cast<int>(r.u32());
    a.mdr.top_fraction = r.f64();
    a.mdr.empty_cell_policy = static_cast<CellPolicy>(r.u8());
    a.mdr.tie_policy = static_cast<TiePolicy>(r.u8());
    a.mdr.kernel = static_cast<Kernel>(r.u8());
    a.mdr.seed = r.u64();
    a.labels_name = r.str();
    const std::uint32_t n = r.u32();
    a.file_names.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i)
        a.file_names.push_back(r.str());
    r.done();
    return a;
}

std::string encode_timings(const StageTimings& t) {
    std::string body;
    put_f64(body, t.load_seconds);
    put_f64(body, t.compute_seconds);
    put_f64(body, t.save_seconds);
    put_f64(body, t.total_seconds);
    return body;
}

StageTimings decode_timings(std::string_view body) {
    Reader r(body);
    StageTimings t;
    t.load_seconds = r.f64();
    t.compute_seconds = r.f64();
    t.save_seconds = r.f64();
    t.total_seconds = r.f64();
    r.done();
    return t;
}

std::string decode_abort(std::string_view body) {
    Reader r(body);
    std::string reason = r.str();
    r.done();
    return reason;
}

int connect_with_retries(const std::string& host, std::uint16_t port,
                         int attempts) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    const std::string port_str = std::to_string(port);
    std::string last_error = "no usable address";
    for (int attempt = 0; attempt < std::max(1, attempts); ++attempt) {
        addrinfo* list = nullptr;
        const int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &list);
        if (rc != 0)
            throw ConnectionRefused("cannot resolve " + host + ": " +
                                    ::gai_strerror(rc));
        for (addrinfo* ai = list; ai; ai = ai->ai_next) {
            const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd < 0)
                continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
                ::freeaddrinfo(list);
                return fd;
            }
            last_error = std::strerror(errno);
            ::close(fd);
        }
        ::freeaddrinfo(list);
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    throw ConnectionRefused("cannot connect to " + host + ":" + port_str + ": " +
                            last_error);
}

} // namespace

// ---- coordinator -----------------------------------------------------------

Coordinator::Coordinator(ClusterConfig cfg, RunManifest manifest)
    : cfg_(std::move(cfg)), manifest_(std::move(manifest)) {
    if (cfg_.expected_workers == 0)
        throw InvalidConfig("expected_workers must be at least 1");
    validate(manifest_.mdr);

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* list = nullptr;
    const std::string port_str = std::to_string(cfg_.listen_port);
    const int rc = ::getaddrinfo(cfg_.listen_host.c_str(), port_str.c_str(),
                                 &hints, &list);
    if (rc != 0)
        throw ConnectionRefused("cannot resolve " + cfg_.listen_host + ": " +
                                ::gai_strerror(rc));
    std::string last_error = "no usable address";
    for (addrinfo* ai = list; ai; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0)
            continue;
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
            listen_fd_ = fd;
            break;
        }
        last_error = std::strerror(errno);
        ::close(fd);
    }
    ::freeaddrinfo(list);
    if (listen_fd_ < 0)
        throw ConnectionRefused("cannot listen on " + cfg_.listen_host + ":" +
                                port_str + ": " + last_error);

    sockaddr_storage addr{};
    socklen_t addr_len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &addr_len);
    if (addr.ss_family == AF_INET)
        port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    else
        port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
}

Coordinator::~Coordinator() {
    if (listen_fd_ >= 0)
        ::close(listen_fd_);
}

ClusterReport Coordinator::run() {
    const auto t_start = Clock::now();
    ClusterReport report;

    // Load stage: parse everything (validates inputs and fixes the task
    // count); in ShipOnRun additionally slurp the raw bytes to transmit.
    const LoadedInputs data = load_inputs(manifest_);
    std::string labels_bytes;
    std::vector<std::string> file_bytes;
    if (cfg_.mode == DistributionMode::ShipOnRun) {
        labels_bytes = read_binary_file(manifest_.labels_path);
        file_bytes.reserve(manifest_.files.size());
        for (const std::filesystem::path& p : manifest_.files)
            file_bytes.push_back(read_binary_file(p));
    }
    report.parse_seconds = seconds_since(t_start);

    std::vector<std::uint64_t> counts;
    for (const GenotypeFile& f : data.files)
        counts.push_back(f.variants.size());
    const std::uint64_t total = count_tasks(counts, manifest_.pair_mode);
    const std::vector<Partition> parts =
        partition_tasks(total, cfg_.expected_workers);

    AssignBody assign_template;
    assign_template.thread_override = cfg_.worker_threads;
    assign_template.mode = cfg_.mode;
    assign_template.pair_mode = manifest_.pair_mode;
    assign_template.mdr = manifest_.mdr;
    assign_template.labels_name = manifest_.labels_path.filename().string();
    for (const std::filesystem::path& p : manifest_.files)
        assign_template.file_names.push_back(p.filename().string());

    const unsigned n_workers = cfg_.expected_workers;
    std::vector<PairResult> results(static_cast<std::size_t>(total));
    std::vector<WorkerReport> worker_reports(n_workers);
    std::vector<Socket> sessions(n_workers);
    std::vector<std::thread> threads;
    threads.reserve(n_workers);

    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::atomic<std::int64_t> distribution_ns{0};

    auto record_failure = [&](std::exception_ptr e) {
        std::scoped_lock lock(error_mutex);
        if (!failed.exchange(true))
            first_error = e;
        for (Socket& s : sessions)
            if (s.fd >= 0)
                ::shutdown(s.fd, SHUT_RDWR);
    };

    auto session = [&](std::uint32_t worker_id) {
        const int fd = sessions[worker_id].fd;
        try {
            const auto hello = recv_msg(fd);
            if (!hello || hello->kind != MsgKind::Hello)
                abort_session(fd, "expected Hello first");
            Reader hr(hello->body);
            const std::uint8_t version = hr.u8();
            hr.u32();  // advertised thread capability; informational
            hr.done();
            if (version != kProtocolVersion) {
                try {
                    std::string body;
                    put_str(body, "protocol version mismatch");
                    send_msg(fd, MsgKind::Abort, body);
                } catch (...) {
                }
                throw VersionMismatch("worker speaks protocol version " +
                                      std::to_string(version) + ", need " +
                                      std::to_string(kProtocolVersion));
            }

            AssignBody assign = assign_template;
            assign.worker_id = worker_id;
            send_msg(fd, MsgKind::Assign, encode_assign(assign));

            if (cfg_.mode == DistributionMode::ShipOnRun) {
                const auto t_ship = Clock::now();
                std::string body;
                put_u32(body, kLabelsBlock);
                put_str(body, labels_bytes);
                send_msg(fd, MsgKind::DataBlock, body);
                for (std::size_t i = 0; i < file_bytes.size(); ++i) {
                    body.clear();
                    put_u32(body, static_cast<std::uint32_t>(i));
                    put_str(body, file_bytes[i]);
                    send_msg(fd, MsgKind::DataBlock, body);
                }
                distribution_ns.fetch_add(
                    std::chrono::duration_cast<std::chrono::nanoseconds>(
                        Clock::now() - t_ship)
                        .count());
            }

            const Partition& part = parts[worker_id];
            {
                std::string body;
                put_u64(body, part.begin);
                put_u64(body, part.end);
                send_msg(fd, MsgKind::TaskRange, body);
            }

            std::uint64_t expected_next = part.begin;
            for (;;) {
                const auto msg = recv_msg(fd, /*eof_ok=*/true);
                if (!msg)
                    throw WorkerLost("worker " + std::to_string(worker_id) +
                                     " disconnected before Done");
                if (msg->kind == MsgKind::Abort)
                    throw WorkerLost("worker " + std::to_string(worker_id) +
                                     " aborted: " + decode_abort(msg->body));
                if (msg->kind == MsgKind::ResultBlock) {
                    Reader r(msg->body);
                    const std::uint64_t start = r.u64();
                    const std::uint32_t count = r.u32();
                    const std::uint32_t k = r.u32();
                    if (k != static_cast<std::uint32_t>(manifest_.mdr.k))
                        abort_session(fd, "result block has wrong fold count");
                    if (start != expected_next || start + count > part.end)
                        abort_session(fd, "result block outside assigned range");
                    for (std::uint32_t i = 0; i < count; ++i) {
                        PairResult& res = results[static_cast<std::size_t>(start + i)];
                        res.pair.file_a = r.u32();
                        res.pair.index_a = r.u32();
                        res.pair.file_b = r.u32();
                        res.pair.index_b = r.u32();
                        res.fold_errors.resize(k);
                        for (std::uint32_t f = 0; f < k; ++f)
                            res.fold_errors[f] = r.f64();
                        res.mean_error = r.f64();
                        res.consistency = -1;
                    }
                    r.done();
                    expected_next = start + count;
                    continue;
                }
                if (msg->kind == MsgKind::Done) {
                    if (expected_next != part.end)
                        abort_session(fd, "worker finished with tasks missing");
                    WorkerReport& wr = worker_reports[worker_id];
                    wr.worker_id = worker_id;
                    wr.tasks = part.size();
                    wr.timings = decode_timings(msg->body);
                    send_msg(fd, MsgKind::Done, std::string());
                    return;
                }
                abort_session(fd, "unexpected message kind " +
                                      std::to_string(static_cast<int>(msg->kind)));
            }
        } catch (...) {
            record_failure(std::current_exception());
        }
    };

    const auto t_collect = Clock::now();
    const auto deadline =
        t_collect + std::chrono::duration_cast<Clock::duration>(
                        std::chrono::duration<double>(cfg_.timeout_seconds));

    // Accept loop; sessions start handshaking while later workers connect.
    try {
        for (unsigned accepted = 0; accepted < n_workers; ++accepted) {
            for (;;) {
                if (failed.load())
                    throw Timeout("aborted while waiting for workers");
                if (Clock::now() >= deadline)
                    throw Timeout("only " + std::to_string(accepted) + " of " +
                                  std::to_string(n_workers) +
                                  " workers connected in time");
                pollfd pfd{listen_fd_, POLLIN, 0};
                const int rc = ::poll(&pfd, 1, 100);
                if (rc < 0 && errno != EINTR)
                    throw ConnectionRefused(std::string("poll failed: ") +
                                            std::strerror(errno));
                if (rc > 0 && (pfd.revents & POLLIN))
                    break;
            }
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0)
                throw ConnectionRefused(std::string("accept failed: ") +
                                        std::strerror(errno));
            set_nodelay(fd);
            set_recv_timeout(fd, cfg_.timeout_seconds);
            {
                // record_failure walks this vector from session threads
                std::scoped_lock lock(error_mutex);
                sessions[accepted] = Socket(fd);
            }
            threads.emplace_back(session, accepted);
        }
    } catch (...) {
        record_failure(std::current_exception());
    }

    for (std::thread& th : threads)
        th.join();

    if (failed.load()) {
        std::scoped_lock lock(error_mutex);
        std::rethrow_exception(first_error);
    }

    report.collect_seconds = seconds_since(t_collect);
    report.distribution_seconds =
        static_cast<double>(distribution_ns.load()) * 1e-9;
    report.total_seconds = seconds_since(t_start);
    report.results = std::move(results);
    report.workers = std::move(worker_reports);
    return report;
}

ClusterReport coordinate(const ClusterConfig& cfg, const RunManifest& manifest) {
    Coordinator coord(cfg, manifest);
    return coord.run();
}

// ---- worker ----------------------------------------------------------------

void run_worker(const WorkerOptions& opt) {
    Socket sock(connect_with_retries(opt.host, opt.port, opt.connect_attempts));
    set_nodelay(sock.fd);
    set_recv_timeout(sock.fd, opt.timeout_seconds);

    {
        std::string body;
        put_u8(body, kProtocolVersion);
        put_u32(body, resolve_threads(opt.n_threads));
        send_msg(sock.fd, MsgKind::Hello, body);
    }

    auto expect = [&](MsgKind kind, const char* what) {
        const auto msg = recv_msg(sock.fd, /*eof_ok=*/true);
        if (!msg)
            throw WorkerLost("coordinator closed the connection");
        if (msg->kind == MsgKind::Abort)
            throw ProtocolError("coordinator aborted: " + decode_abort(msg->body));
        if (msg->kind != kind)
            abort_session(sock.fd, std::string("expected ") + what);
        return *msg;
    };

    const AssignBody assign = decode_assign(expect(MsgKind::Assign, "Assign").body);
    validate(assign.mdr);

    StageTimings timings;
    const auto t_load = Clock::now();
    LoadedInputs data;
    if (assign.mode == DistributionMode::ShipOnRun) {
        const auto labels_msg = expect(MsgKind::DataBlock, "labels DataBlock");
        Reader lr(labels_msg.body);
        if (lr.u32() != kLabelsBlock)
            abort_session(sock.fd, "first DataBlock must carry the labels");
        data.labels = parse_labels_bytes(lr.str(), assign.labels_name);
        lr.done();
        data.files.reserve(assign.file_names.size());
        for (std::size_t i = 0; i < assign.file_names.size(); ++i) {
            const auto block = expect(MsgKind::DataBlock, "genotype DataBlock");
            Reader r(block.body);
            if (r.u32() != static_cast<std::uint32_t>(i))
                abort_session(sock.fd, "DataBlocks out of order");
            GenotypeFile f = parse_genotype_bytes(r.str(), assign.file_names[i],
                                                  data.labels.size());
            r.done();
            f.file_id = static_cast<std::uint32_t>(i);
            data.files.push_back(std::move(f));
        }
    } else {
        if (!opt.data_dir)
            abort_session(sock.fd,
                          "preloaded mode needs a local data directory");
        data.labels = parse_labels(*opt.data_dir / assign.labels_name);
        for (std::size_t i = 0; i < assign.file_names.size(); ++i) {
            GenotypeFile f = parse_genotype_file(
                *opt.data_dir / assign.file_names[i], data.labels.size());
            f.file_id = static_cast<std::uint32_t>(i);
            data.files.push_back(std::move(f));
        }
    }
    timings.load_seconds = seconds_since(t_load);

    const auto range_msg = expect(MsgKind::TaskRange, "TaskRange");
    Reader rr(range_msg.body);
    const std::uint64_t begin = rr.u64();
    const std::uint64_t end = rr.u64();
    rr.done();
    if (begin > end)
        abort_session(sock.fd, "task range runs backwards");

    const unsigned threads = assign.thread_override > 0
                                 ? assign.thread_override
                                 : resolve_threads(opt.n_threads);

    auto send_results = [&](std::uint64_t start,
                            const std::vector<PairResult>& block) {
        std::string body;
        put_u64(body, start);
        put_u32(body, static_cast<std::uint32_t>(block.size()));
        put_u32(body, static_cast<std::uint32_t>(assign.mdr.k));
        for (const PairResult& r : block) {
            put_u32(body, r.pair.file_a);
            put_u32(body, r.pair.index_a);
            put_u32(body, r.pair.file_b);
            put_u32(body, r.pair.index_b);
            for (double e : r.fold_errors)
                put_f64(body, e);
            put_f64(body, r.mean_error);
        }
        send_msg(sock.fd, MsgKind::ResultBlock, body);
    };

    try {
        for (std::uint64_t chunk = begin; chunk < end;) {
            const std::uint64_t chunk_end = std::min(end, chunk + kWorkerChunkTasks);
            const auto t_compute = Clock::now();
            const std::vector<PairResult> chunk_results = run_task_range(
                data, assign.mdr, assign.pair_mode, chunk, chunk_end, threads);
            timings.compute_seconds += seconds_since(t_compute);

            const auto t_save = Clock::now();
            std::size_t offset = 0;
            while (offset < chunk_results.size()) {
                const std::size_t n =
                    std::min(kResultsPerBlock, chunk_results.size() - offset);
                std::vector<PairResult> block(
                    chunk_results.begin() + static_cast<std::ptrdiff_t>(offset),
                    chunk_results.begin() + static_cast<std::ptrdiff_t>(offset + n));
                send_results(chunk + offset, block);
                offset += n;
            }
            timings.save_seconds += seconds_since(t_save);
            chunk = chunk_end;
        }
    } catch (const ClusterError&) {
        throw;
    } catch (const std::exception& e) {
        try {
            std::string body;
            put_str(body, e.what());
            send_msg(sock.fd, MsgKind::Abort, body);
        } catch (...) {
        }
        throw;
    }

    timings.total_seconds = timings.load_seconds + timings.compute_seconds +
                            timings.save_seconds;
    send_msg(sock.fd, MsgKind::Done, encode_timings(timings));
    expect(MsgKind::Done, "Done");
}

} // namespace epipair
