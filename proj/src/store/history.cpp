#include "nss/store/history.hpp"

#include "nss/store/model_store.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <limits>

#include <fcntl.h>
#include <unistd.h>

namespace nss::store {

using nlohmann::json;

namespace {

constexpr std::string_view kSegmentPrefix = "segment-";
constexpr std::string_view kSegmentSuffix = ".jsonl";

json optional_string(const std::optional<std::string>& s) {
    return s ? json(*s) : json(nullptr);
}

std::optional<std::string> read_optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

std::optional<std::uint32_t> parse_segment_number(const std::string& name) {
    if (name.size() <= kSegmentPrefix.size() + kSegmentSuffix.size() || name.rfind(kSegmentPrefix, 0) != 0 ||
        name.substr(name.size() - kSegmentSuffix.size()) != kSegmentSuffix) {
        return std::nullopt;
    }
    const auto digits = std::string_view(name).substr(kSegmentPrefix.size(),
                                                      name.size() - kSegmentPrefix.size() - kSegmentSuffix.size());
    std::uint32_t n = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    return n;
}

}  // namespace

json to_json(const StateRecord& r) {
    return json{
        {"id", r.id},
        {"target", r.target_id},
        {"if_index", r.if_index},
        {"ts_ms", r.ts_ms},
        {"decision", r.decision ? to_json(*r.decision) : json(nullptr)},
        {"label", optional_string(r.label)},
        {"features", r.features},
        {"raw_features", r.raw_features},
        {"feature_order", r.feature_order},
        {"recommended_strategy", optional_string(r.recommended_strategy)},
        {"model_id", optional_string(r.model_id)},
    };
}

StateRecord state_record_from_json(const json& j) {
    try {
        StateRecord r;
        r.id = j.at("id").get<std::uint64_t>();
        r.target_id = j.at("target").get<std::string>();
        r.if_index = j.at("if_index").get<int>();
        r.ts_ms = j.at("ts_ms").get<std::int64_t>();
        if (!j.at("decision").is_null()) r.decision = decision_from_json(j.at("decision"));
        r.label = read_optional_string(j, "label");
        r.features = j.at("features").get<std::vector<double>>();
        r.raw_features = j.at("raw_features").get<std::vector<double>>();
        r.feature_order = j.at("feature_order").get<std::vector<std::string>>();
        r.recommended_strategy = read_optional_string(j, "recommended_strategy");
        r.model_id = read_optional_string(j, "model_id");
        return r;
    } catch (const json::exception& e) {
        throw StoreError(std::string("invalid state record: ") + e.what());
    }
}

HistoryStore::HistoryStore(std::filesystem::path dir, HistoryOptions options)
    : dir_(std::move(dir)), options_(options) {
    if (options_.records_per_segment == 0 || options_.max_records == 0) {
        throw StoreError("history segment size and retention must be positive");
    }
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
        throw StoreIoError("cannot create history directory " + dir_.string() + ": " + ec.message());
    }
    load();
    open_active_segment();
}

HistoryStore::~HistoryStore() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

std::filesystem::path HistoryStore::segment_path(std::uint32_t n) const {
    char name[32];
    std::snprintf(name, sizeof(name), "segment-%06u.jsonl", n);
    return dir_ / name;
}

std::uint32_t HistoryStore::stream_index(const std::string& target, int if_index) {
    const auto key = std::make_pair(target, if_index);
    auto it = streams_.find(key);
    if (it != streams_.end()) {
        return it->second;
    }
    const auto idx = static_cast<std::uint32_t>(stream_keys_.size());
    streams_.emplace(key, idx);
    stream_keys_.push_back(key);
    stream_last_ts_.push_back(std::numeric_limits<std::int64_t>::min());
    return idx;
}

std::uint32_t HistoryStore::label_index(const std::optional<std::string>& label) {
    if (!label) {
        return 0;
    }
    const auto it = std::find(labels_.begin() + 1, labels_.end(), *label);
    if (it != labels_.end()) {
        return static_cast<std::uint32_t>(it - labels_.begin());
    }
    labels_.push_back(*label);
    return static_cast<std::uint32_t>(labels_.size() - 1);
}

void HistoryStore::load() {
    std::vector<std::uint32_t> segments;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (const auto n = parse_segment_number(entry.path().filename().string())) {
            segments.push_back(*n);
        }
    }
    std::sort(segments.begin(), segments.end());

    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto path = segment_path(segments[s]);
        const std::string content = read_file(path);
        const bool last_segment = s + 1 == segments.size();
        std::uint64_t offset = 0;
        segment_counts_[segments[s]] = 0;
        while (offset < content.size()) {
            const auto eol = content.find('\n', offset);
            if (eol == std::string::npos) {
                // Torn write at the tail: never acknowledged, drop it.
                if (!last_segment) {
                    throw StoreError("history segment " + path.string() + " has a torn record mid-log");
                }
                std::filesystem::resize_file(path, offset);
                break;
            }
            StateRecord r;
            try {
                r = state_record_from_json(json::parse(content.substr(offset, eol - offset)));
            } catch (const std::exception& e) {
                if (last_segment && eol + 1 == content.size()) {
                    std::filesystem::resize_file(path, offset);
                    break;
                }
                throw StoreError("corrupt history record in " + path.string() + " at byte " +
                                 std::to_string(offset) + ": " + e.what());
            }
            const auto stream = stream_index(r.target_id, r.if_index);
            stream_last_ts_[stream] = std::max(stream_last_ts_[stream], r.ts_ms);
            index_.push_back(IndexEntry{r.id, r.ts_ms, stream, label_index(r.label), segments[s], offset,
                                        static_cast<std::uint32_t>(eol - offset)});
            ++segment_counts_[segments[s]];
            next_id_ = std::max(next_id_, r.id + 1);
            offset = eol + 1;
        }
    }
    if (!segments.empty()) {
        active_segment_ = segments.back();
    }
}

void HistoryStore::open_active_segment() {
    if (active_segment_ == 0 || segment_counts_[active_segment_] >= options_.records_per_segment) {
        ++active_segment_;
        segment_counts_[active_segment_] = 0;
    }
    if (fd_ >= 0) {
        ::close(fd_);
    }
    const auto path = segment_path(active_segment_);
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw StoreIoError("cannot open history segment " + path.string() + ": " + std::strerror(errno));
    }
    active_size_ = std::filesystem::file_size(path);
    fsync_directory(dir_);
}

StateRecord HistoryStore::append(StateRecord record) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(record.target_id, record.if_index);
    if (auto it = streams_.find(key); it != streams_.end() && record.ts_ms < stream_last_ts_[it->second]) {
        throw StoreError("history timestamp for " + record.target_id + "/" + std::to_string(record.if_index) +
                         " went backwards");
    }
    if (segment_counts_[active_segment_] >= options_.records_per_segment) {
        open_active_segment();
    }

    record.id = next_id_;
    const std::string line = canonical_dump(to_json(record)) + "\n";
    std::size_t done = 0;
    while (done < line.size()) {
        const auto n = ::write(fd_, line.data() + done, line.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            const std::string reason = std::strerror(errno);
            // Drop any partial line so the log stays parseable.
            [[maybe_unused]] const int rc = ::ftruncate(fd_, static_cast<off_t>(active_size_));
            throw StoreIoError("history append failed: " + reason);
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd_) != 0) {
        throw StoreIoError(std::string("history fsync failed: ") + std::strerror(errno));
    }

    const auto stream = stream_index(record.target_id, record.if_index);
    stream_last_ts_[stream] = record.ts_ms;
    index_.push_back(IndexEntry{record.id, record.ts_ms, stream, label_index(record.label), active_segment_,
                                active_size_, static_cast<std::uint32_t>(line.size() - 1)});
    active_size_ += line.size();
    ++segment_counts_[active_segment_];
    ++next_id_;
    prune();
    return record;
}

void HistoryStore::prune() {
    while (index_.size() > options_.max_records && segment_counts_.size() > 1) {
        const auto oldest = segment_counts_.begin();
        if (oldest->first == active_segment_) {
            break;
        }
        const std::uint32_t seg = oldest->first;
        index_.erase(std::remove_if(index_.begin(), index_.end(), [seg](const IndexEntry& e) { return e.segment == seg; }),
                     index_.end());
        std::error_code ec;
        std::filesystem::remove(segment_path(seg), ec);
        segment_counts_.erase(oldest);
    }
}

StateRecord HistoryStore::read_entry(const IndexEntry& e) const {
    std::ifstream in(segment_path(e.segment), std::ios::binary);
    if (!in) {
        throw StoreIoError("cannot open history segment " + segment_path(e.segment).string());
    }
    in.seekg(static_cast<std::streamoff>(e.offset));
    std::string line(e.length, '\0');
    if (!in.read(line.data(), e.length)) {
        throw StoreIoError("short read in history segment " + segment_path(e.segment).string());
    }
    return state_record_from_json(json::parse(line));
}

HistoryPage HistoryStore::query(const HistoryQuery& q) const {
    std::lock_guard lock(mutex_);
    std::optional<std::uint32_t> label_filter;
    if (q.label) {
        const auto it = std::find(labels_.begin() + 1, labels_.end(), *q.label);
        if (it == labels_.end()) {
            return {};
        }
        label_filter = static_cast<std::uint32_t>(it - labels_.begin());
    }
    std::vector<const IndexEntry*> matches;
    for (const auto& e : index_) {
        const auto& [target, if_index] = stream_keys_[e.stream];
        if (q.target_id && target != *q.target_id) continue;
        if (q.if_index && if_index != *q.if_index) continue;
        if (q.from_ms && e.ts_ms < *q.from_ms) continue;
        if (q.to_ms && e.ts_ms > *q.to_ms) continue;
        if (label_filter && e.label != *label_filter) continue;
        matches.push_back(&e);
    }
    std::stable_sort(matches.begin(), matches.end(),
                     [](const IndexEntry* a, const IndexEntry* b) { return a->ts_ms < b->ts_ms; });

    HistoryPage page;
    page.total = matches.size();
    for (std::size_t i = q.offset; i < matches.size() && page.records.size() < q.limit; ++i) {
        page.records.push_back(read_entry(*matches[i]));
    }
    return page;
}

std::optional<StateRecord> HistoryStore::get(std::uint64_t id) const {
    std::lock_guard lock(mutex_);
    const auto it = std::lower_bound(index_.begin(), index_.end(), id,
                                     [](const IndexEntry& e, std::uint64_t v) { return e.id < v; });
    if (it == index_.end() || it->id != id) {
        return std::nullopt;
    }
    return read_entry(*it);
}

std::size_t HistoryStore::size() const {
    std::lock_guard lock(mutex_);
    return index_.size();
}

std::size_t HistoryStore::segment_count() const {
    std::lock_guard lock(mutex_);
    return segment_counts_.size();
}

}  // namespace nss::store
