#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "c5/error.hpp"
#include "c5/ingest.hpp"
#include "support.hpp"

namespace {

using namespace c5;

/// Local HTTP server with failure injection.
class FixtureServer {
   public:
    explicit FixtureServer(std::string blob) : blob_(std::move(blob)) {
        server_.Get("/blob", [this](const httplib::Request &, httplib::Response &res) {
            ++requests;
            const bool cut = cut_next.exchange(false);
            res.set_content_provider(blob_.size(), "application/octet-stream",
                                     [this, cut](std::size_t offset, std::size_t length, httplib::DataSink &sink) {
                                         // an interrupted transfer sends a third of the range, then drops
                                         const std::size_t n = cut ? std::max<std::size_t>(1, length / 3) : length;
                                         sink.write(blob_.data() + offset, n);
                                         return !cut;
                                     });
        });
        server_.Get("/missing", [](const httplib::Request &, httplib::Response &res) { res.status = 404; });
        server_.Get("/broken", [this](const httplib::Request &, httplib::Response &res) {
            ++requests;
            res.status = 503;
        });
        server_.Get("/CC-MAIN-2019-35-index", [](const httplib::Request &req, httplib::Response &res) {
            std::string body;
            body += R"({"url": "http://a.cz/", "languages": "ces", "filename": "crawl-data/CC-MAIN-2019-35/segments/1/warc/x.warc.gz", "offset": "10", "length": "20"})" "\n";
            body += R"({"url": "http://b.com/", "languages": "eng,ces", "filename": "crawl-data/CC-MAIN-2019-35/segments/1/warc/x.warc.gz", "offset": "30", "length": "40"})" "\n";
            body += R"({"url": "http://c.cz/", "languages": "ces,eng", "filename": "crawl-data/CC-MAIN-2019-35/segments/1/warc/y.warc.gz", "offset": "50", "length": "60"})" "\n";
            EXPECT_EQ(req.get_param_value("output"), "json");
            res.set_content(body, "application/json");
        });
        server_.Get("/CC-MAIN-2018-39-index", [](const httplib::Request &, httplib::Response &res) {
            res.set_content(R"({"url": "http://a.cz/", "filename": "f.warc.gz", "offset": "1", "length": "2"})" "\n",
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FixtureServer() {
        server_.stop();
        thread_.join();
    }

    [[nodiscard]] std::string url(const std::string &path) const {
        return "http://127.0.0.1:" + std::to_string(port_) + path;
    }

    std::atomic<bool> cut_next{false};
    std::atomic<int> requests{0};

   private:
    std::string blob_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string make_blob(std::size_t n) {
    std::string s(n, '\0');
    std::uint64_t x = 88172645463325252ULL;
    for (auto &c : s) {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        c = static_cast<char>(x);
    }
    return s;
}

FetchOptions fast_options() {
    FetchOptions o;
    o.attempts = 3;
    o.backoff = std::chrono::milliseconds(1);
    o.timeout = std::chrono::seconds(5);
    return o;
}

TEST(HttpFetch, OneShotMatchesBlob) {
    const std::string blob = make_blob(300000);
    FixtureServer srv(blob);
    std::string got;
    EXPECT_EQ(fetch_archive(srv.url("/blob"), [&](std::string_view c) { got.append(c); }, fast_options()),
              blob.size());
    EXPECT_EQ(got, blob);
}

TEST(HttpFetch, InterruptedTransferResumes) {
    const std::string blob = make_blob(300000);
    FixtureServer srv(blob);
    std::string one_shot;
    fetch_archive(srv.url("/blob"), [&](std::string_view c) { one_shot.append(c); }, fast_options());
    srv.requests = 0;
    srv.cut_next = true;
    std::string resumed;
    fetch_archive(srv.url("/blob"), [&](std::string_view c) { resumed.append(c); }, fast_options());
    EXPECT_EQ(resumed, one_shot);
    EXPECT_GE(srv.requests.load(), 2);
}

TEST(HttpFetch, CacheResumesPartialFile) {
    const std::string blob = make_blob(200000);
    FixtureServer srv(blob);
    c5test::TempDir cache;
    // leave a partial download behind, as an aborted run would
    FetchOptions once = fast_options();
    once.attempts = 1;
    srv.cut_next = true;
    EXPECT_THROW(fetch_to_cache(srv.url("/blob"), cache.path(), once), Error);
    const auto path = fetch_to_cache(srv.url("/blob"), cache.path(), fast_options());
    EXPECT_EQ(c5test::read_file(path), blob);
    // a second call is served from the cache
    srv.requests = 0;
    EXPECT_EQ(fetch_to_cache(srv.url("/blob"), cache.path(), fast_options()), path);
    EXPECT_EQ(srv.requests.load(), 0);
}

TEST(HttpFetch, ErrorMapping) {
    FixtureServer srv("x");
    try {
        fetch_archive(srv.url("/missing"), [](std::string_view) {}, fast_options());
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotFound);
    }
    try {
        fetch_archive(srv.url("/broken"), [](std::string_view) {}, fast_options());
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Transient);
    }
    EXPECT_EQ(srv.requests.load(), 3);
}

TEST(HttpFetch, ConnectionRefusedIsTransient) {
    int port = 0;
    {
        httplib::Server s;
        port = s.bind_to_any_port("127.0.0.1");
    }
    FetchOptions o = fast_options();
    o.timeout = std::chrono::seconds(1);
    try {
        fetch_archive("http://127.0.0.1:" + std::to_string(port) + "/x", [](std::string_view) {}, o);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Transient);
    }
}

TEST(HttpIndexTest, SelectsPrimaryLanguage) {
    FixtureServer srv("");
    HttpIndex idx(srv.url(""), "*.cz", "https://data.example.org", fast_options());
    const auto ptrs = query_index(idx, "CC-MAIN-2019-35", "ces", std::nullopt);
    ASSERT_EQ(ptrs.size(), 2u);
    EXPECT_EQ(ptrs[0].target_uri, "http://a.cz/");
    EXPECT_EQ(ptrs[0].archive_path, "https://data.example.org/crawl-data/CC-MAIN-2019-35/segments/1/wet/x.warc.wet.gz");
    EXPECT_EQ(ptrs[0].offset, 10u);
    EXPECT_EQ(ptrs[1].target_uri, "http://c.cz/");
    EXPECT_EQ(ptrs[1].content_length, 60u);
    EXPECT_EQ(query_index(idx, "CC-MAIN-2019-35", "ces", 1).size(), 1u);
    EXPECT_TRUE(query_index(idx, "CC-MAIN-2019-35", "ces", 0).empty());
}

TEST(HttpIndexTest, MissingLanguageColumnIsUnsupported) {
    FixtureServer srv("");
    HttpIndex idx(srv.url(""), "*.cz", "https://data.example.org", fast_options());
    try {
        query_index(idx, "CC-MAIN-2018-39", "ces", std::nullopt);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
    }
    try {
        query_index(idx, "CC-MAIN-2031-99", "ces", std::nullopt);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotFound);
    }
}

}  // namespace
