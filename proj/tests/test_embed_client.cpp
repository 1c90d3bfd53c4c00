// Apache License, Version 2.0, refer to LICENSE.txt

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "labeldesc/embed_client.hpp"

using namespace labeldesc;

namespace {

// Deterministic fake embedding: length, first byte and a constant.
std::vector<double> fake_vector(const std::string& text) {
  return {static_cast<double>(text.size()), text.empty() ? 0.0 : static_cast<double>(text[0]), 1.5};
}

class MockService {
 public:
  MockService() {
    server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      if (mode_ == Mode::kError) {
        res.status = 503;
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json vectors = nlohmann::json::array();
      for (const auto& t : body.at("texts")) last_batch_.push_back(t.get<std::string>());
      for (const auto& t : body.at("texts")) vectors.push_back(fake_vector(t.get<std::string>()));
      if (mode_ == Mode::kShort) vectors.erase(vectors.begin());
      res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockService() {
    server_.stop();
    thread_.join();
  }

  enum class Mode { kOk, kError, kShort };
  void set_mode(Mode m) { mode_ = m; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int hits() const { return hits_; }
  std::vector<std::string> last_batch_;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::atomic<Mode> mode_{Mode::kOk};
};

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "labeldesc_embed_tests";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST(EmbedClient, Sha256KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(EmbedClient, EmptyInputSendsNothing) {
  MockService svc;
  EXPECT_TRUE(fetch_embeddings(svc.endpoint(), {}).empty());
  EXPECT_EQ(svc.hits(), 0);
}

TEST(EmbedClient, VectorsMatchServiceAndDeduplicate) {
  MockService svc;
  EmbeddingClient client(svc.endpoint());
  const std::vector<std::string> texts{"great", "awful", "great"};
  const auto set = client.fetch(texts);
  EXPECT_EQ(set.size(), 2u);
  EXPECT_EQ(set.ids(), (std::vector<std::string>{"great", "awful"}));
  const auto v = set.at("awful");
  EXPECT_EQ(std::vector<double>(v.begin(), v.end()), fake_vector("awful"));
  EXPECT_EQ(svc.last_batch_, (std::vector<std::string>{"great", "awful"}));
  EXPECT_EQ(client.requests_sent(), 1u);
}

TEST(EmbedClient, SecondCallIsServedFromCache) {
  MockService svc;
  const auto cache = temp_path("cache.jsonl");
  const std::vector<std::string> texts{"one", "two"};
  const auto first = fetch_embeddings(svc.endpoint(), texts, cache);
  ASSERT_EQ(svc.hits(), 1);

  EmbeddingClient fresh(svc.endpoint(), cache);
  const auto second = fresh.fetch(texts);
  EXPECT_EQ(svc.hits(), 1);
  EXPECT_EQ(fresh.requests_sent(), 0u);
  EXPECT_EQ(first, second);

  // Only the unseen text goes over the wire.
  svc.last_batch_.clear();
  const std::vector<std::string> more{"two", "three"};
  fresh.fetch(more);
  EXPECT_EQ(svc.last_batch_, (std::vector<std::string>{"three"}));
}

TEST(EmbedClient, ServiceErrors) {
  MockService svc;
  const std::vector<std::string> texts{"x", "y"};
  svc.set_mode(MockService::Mode::kError);
  EXPECT_THROW(fetch_embeddings(svc.endpoint(), texts), EmbeddingServiceError);
  svc.set_mode(MockService::Mode::kShort);
  EXPECT_THROW(fetch_embeddings(svc.endpoint(), texts), EmbeddingServiceError);
}

TEST(EmbedClient, UnreachableService) {
  EmbeddingClient client("http://127.0.0.1:1", {}, std::chrono::seconds(2));
  const std::vector<std::string> texts{"x"};
  EXPECT_THROW(client.fetch(texts), EmbeddingServiceError);
}

TEST(EmbedClient, EmbedDescriptionsKeysBySetAndClass) {
  MockService svc;
  const LabelSpace space({"positive", "negative"});
  const std::vector<DescriptionSet> sets{
      DescriptionSet("s1", {{"positive", "good"}, {"negative", "bad"}}, space),
      DescriptionSet("s2", {{"positive", "good"}, {"negative", "poor"}}, space)};
  EmbeddingClient client(svc.endpoint());
  const auto e = embed_descriptions(client, sets, space);
  EXPECT_EQ(e.size(), 4u);
  const auto v = e.at(description_key("s2", "negative"));
  EXPECT_EQ(std::vector<double>(v.begin(), v.end()), fake_vector("poor"));
}
