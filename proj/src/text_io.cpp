#include "epipair/text_io.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "epipair/errors.hpp"

namespace epipair {

bool has_gz_suffix(std::string_view name) {
    return name.size() > 3 && name.substr(name.size() - 3) == ".gz";
}

std::string read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("read failed: " + path.string());
    return bytes;
}

std::string gunzip(std::string_view bytes) {
    z_stream zs{};
    // 15 + 16: gzip container
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        throw IoError("inflateInit failed");

    std::string out;
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
    zs.avail_in = static_cast<uInt>(bytes.size());
    char buf[1 << 16];
    int rc = Z_OK;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw IoError(std::string("gzip decompression failed: ") +
                          (zs.msg ? zs.msg : zError(rc)));
        }
        out.append(buf, sizeof(buf) - zs.avail_out);
    } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
    inflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw IoError("truncated gzip stream");
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::string bytes = read_binary_file(path);
    if (has_gz_suffix(path.string()))
        return gunzip(bytes);
    return bytes;
}

namespace {

std::string gzip_compress(std::string_view text) {
    z_stream zs{};
    // Default level; header written by deflate carries no timestamp, so equal
    // inputs produce equal bytes.
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflateInit failed");
    std::string out;
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(text.data()));
    zs.avail_in = static_cast<uInt>(text.size());
    char buf[1 << 16];
    int rc = Z_OK;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof(buf);
        rc = deflate(&zs, Z_FINISH);
        if (rc == Z_STREAM_ERROR) {
            deflateEnd(&zs);
            throw IoError("gzip compression failed");
        }
        out.append(buf, sizeof(buf) - zs.avail_out);
    } while (rc != Z_STREAM_END);
    deflateEnd(&zs);
    return out;
}

} // namespace

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::string bytes;
    std::string_view payload = text;
    if (has_gz_suffix(path.string())) {
        bytes = gzip_compress(text);
        payload = bytes;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot create " + path.string() + ": " + std::strerror(errno));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out)
        throw IoError("write failed: " + path.string());
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line = nl == std::string_view::npos
                                    ? text.substr(start)
                                    : text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.push_back(line);
        if (nl == std::string_view::npos)
            break;
        start = nl + 1;
    }
    return lines;
}

void split_fields(std::string_view line, char delim,
                  std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace epipair
