#pragma once

// Working memory: a small set of single-chunk buffers, each with one owner.
// The central system may write any buffer; a shadow system only its own.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmarch/chunk.hpp"

namespace mmarch {

// Simulated time in integer milliseconds.
using Millis = std::int64_t;

inline const Symbol& central_owner() {
    static const Symbol s{"central"};
    return s;
}

struct PendingQuery {
    Query query;
    ChunkId id = 0;
    bool operator==(const PendingQuery&) const = default;
};

struct Buffer {
    Symbol name;
    Symbol owner;
    std::optional<Chunk> content;
    std::optional<PendingQuery> query; // a posted request awaiting an answer
    bool urgent = false;

    bool empty() const { return !content && !query; }
};

enum class WriteOp { write, clear, query };

inline const char* to_string(WriteOp op) {
    switch (op) {
    case WriteOp::write: return "write";
    case WriteOp::clear: return "clear";
    case WriteOp::query: return "query";
    }
    return "?";
}

struct WmWrite {
    Symbol writer;
    Symbol buffer;
    WriteOp op = WriteOp::write;
    ChunkId chunk = 0;
    bool urgent = false;
    std::string content;
};

class WorkingMemory {
public:
    static constexpr std::size_t default_capacity = 8;

    explicit WorkingMemory(std::size_t capacity = default_capacity) : capacity_(capacity) {}

    void add_buffer(Symbol name, Symbol owner) {
        if (find(name))
            throw invalid_argument("duplicate buffer '" + name.str() + "'");
        if (buffers_.size() >= capacity_)
            throw invalid_argument("working memory holds at most " + std::to_string(capacity_) +
                                   " buffers");
        buffers_.push_back(Buffer{std::move(name), std::move(owner), std::nullopt, std::nullopt, false});
    }

    const Buffer* find(const Symbol& name) const {
        for (const auto& b : buffers_)
            if (b.name == name)
                return &b;
        return nullptr;
    }

    Buffer* find(const Symbol& name) {
        return const_cast<Buffer*>(static_cast<const WorkingMemory&>(*this).find(name));
    }

    Buffer& at(const Symbol& name) {
        if (auto* b = find(name))
            return *b;
        throw invalid_argument("unknown buffer '" + name.str() + "'");
    }

    const Buffer& at(const Symbol& name) const { return const_cast<WorkingMemory&>(*this).at(name); }

    const std::vector<Buffer>& buffers() const { return buffers_; }
    std::size_t capacity() const { return capacity_; }

    std::size_t nonempty_chunk_buffers() const {
        std::size_t n = 0;
        for (const auto& b : buffers_)
            n += b.content.has_value();
        return n;
    }

private:
    std::size_t capacity_;
    std::vector<Buffer> buffers_;
};

// Throws ownership_violation unless `writer` is central or owns `buffer`.
inline Buffer& check_write_access(WorkingMemory& wm, const Symbol& writer, const Symbol& buffer) {
    Buffer& b = wm.at(buffer);
    if (writer != central_owner() && writer != b.owner)
        throw ownership_violation(writer.str(), buffer.str());
    return b;
}

inline WmWrite wm_write(WorkingMemory& wm, const Symbol& writer, const Symbol& buffer, Chunk chunk,
                        bool urgent) {
    Buffer& b = check_write_access(wm, writer, buffer);
    WmWrite ev{writer, buffer, WriteOp::write, chunk.id, urgent, to_string(chunk)};
    b.content = std::move(chunk);
    b.query.reset();
    b.urgent = urgent;
    return ev;
}

inline WmWrite wm_clear(WorkingMemory& wm, const Symbol& writer, const Symbol& buffer) {
    Buffer& b = check_write_access(wm, writer, buffer);
    b.content.reset();
    b.query.reset();
    b.urgent = false;
    return WmWrite{writer, buffer, WriteOp::clear, 0, false, ""};
}

inline WmWrite wm_post_query(WorkingMemory& wm, const Symbol& writer, const Symbol& buffer,
                             PendingQuery query) {
    Buffer& b = check_write_access(wm, writer, buffer);
    WmWrite ev{writer, buffer, WriteOp::query, query.id, false, to_string(query.query)};
    b.content.reset();
    b.query = std::move(query);
    b.urgent = false;
    return ev;
}

} // namespace mmarch
