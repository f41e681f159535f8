#include <doctest.h>

#include <fstream>

#include "chatdit/blob_store.hpp"
#include "chatdit/errors.hpp"
#include "chatdit/hash.hpp"
#include "chatdit/image.hpp"
#include "chatdit/persistence.hpp"
#include "chatdit/session.hpp"
#include "support.hpp"

using namespace chatdit;
using testing::TempDir;

namespace {

Bytes file_bytes(const std::string& name) {
  const auto text = read_file(testing::data_path(name));
  REQUIRE(text);
  return Bytes(text->begin(), text->end());
}

// Digests computed externally (hashlib) for the checked-in fixtures.
constexpr const char* kUploadPngSha = "5cd385299229117e03c6d52f62c868e44a15e8966b0b1de11be8902399c16278";

}  // namespace

TEST_CASE("sha256 matches published vectors") {
  CHECK(sha256_hex(std::string_view("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string_view("")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(file_bytes("upload_512.png")) == kUploadPngSha);
}

TEST_CASE("base64 round trip and rejection") {
  for (std::size_t n = 0; n < 40; ++n) {
    Bytes b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(i * 37 + 11);
    CHECK(base64_decode(base64_encode(b)) == b);
  }
  CHECK(base64_encode(Bytes{'f', 'o', 'o', 'b'}) == "Zm9vYg==");
  CHECK_THROWS_AS(base64_decode("Zm9v!g=="), InputError);
}

TEST_CASE("step seeds depend on every component") {
  const auto s = step_seed("sess", 0, 0, 7);
  CHECK(s == step_seed("sess", 0, 0, 7));
  CHECK(s != step_seed("sess", 0, 1, 7));
  CHECK(s != step_seed("sess", 1, 0, 7));
  CHECK(s != step_seed("other", 0, 0, 7));
  CHECK(s != step_seed("sess", 0, 0, 8));
}

TEST_CASE("png encode/decode is lossless") {
  const Image img = testing::noise(37, 19, 5);
  const Bytes png = encode_png(img);
  CHECK(looks_like_png(png));
  CHECK(decode_image(png) == img);

  GrayImage mask(16, 8, 0);
  mask.at(3, 4) = 255;
  CHECK(decode_png_gray(encode_png(mask)) == mask);
}

TEST_CASE("jpeg uploads decode") {
  const Bytes jpg = file_bytes("small.jpg");
  CHECK(looks_like_jpeg(jpg));
  const Image img = decode_image(jpg);
  CHECK(img.width == 24);
  CHECK(img.height == 16);
  const std::uint8_t* px = img.at(5, 5);
  CHECK(std::abs(px[2] - 200) <= 3);
}

TEST_CASE("undecodable and degenerate images are input errors") {
  const Bytes junk{'n', 'o', 't', ' ', 'a', 'n', ' ', 'i', 'm', 'a', 'g', 'e'};
  CHECK_THROWS_AS(decode_image(junk), InputError);
  Bytes png = encode_png(Image(1, 1));
  // Zero the IHDR width (bytes 16..19).
  png[16] = png[17] = png[18] = png[19] = 0;
  CHECK_THROWS_AS(decode_image(png), InputError);
}

TEST_CASE("blob stores are content addressed") {
  const Bytes data{1, 2, 3, 4};
  MemoryBlobStore mem;
  const std::string key = mem.put(data);
  CHECK(key == sha256_hex(data));
  CHECK(mem.put(data) == key);
  CHECK(mem.size() == 1);
  CHECK(*mem.get(key) == data);
  CHECK_FALSE(mem.get(std::string(64, '0')));

  TempDir dir;
  FileBlobStore files(dir.path());
  CHECK(files.put(data) == key);
  CHECK(std::filesystem::exists(dir.path() / "blobs" / (key + ".png")));
  CHECK(files.contains(key));
  CHECK(*files.get(key) == data);
  CHECK_FALSE(files.contains("../escape"));
}

TEST_CASE("atomic writes leave the old file intact when the rename never happens") {
  TempDir dir;
  const auto target = dir.path() / "session.json";
  atomic_write_file(target, "old");
  // A crash between temp write and rename leaves only the temp file behind.
  std::ofstream(dir.path() / "session.json.tmp.999.0") << "half-written";
  CHECK(*read_file(target) == "old");
  atomic_write_file(target, "new");
  CHECK(*read_file(target) == "new");
}

TEST_CASE("register_image") {
  MemoryBlobStore blobs;
  Session s = new_session("s1");
  const Bytes png = file_bytes("upload_512.png");

  SUBCASE("dimensions pass through, caption left for the Description agent") {
    const ImageRecord rec = register_image(s, blobs, ImageSource::uploaded, png, "", 0);
    CHECK(rec.id == "img_0001");
    CHECK(rec.width == 512);
    CHECK(rec.height == 512);
    CHECK(rec.caption.empty());
    CHECK(rec.storage_key == kUploadPngSha);
  }
  SUBCASE("identical bytes give two records and one blob") {
    const auto a = register_image(s, blobs, ImageSource::uploaded, png, "", 0);
    const auto b = register_image(s, blobs, ImageSource::uploaded, png, "", 0);
    CHECK(a.id != b.id);
    CHECK(a.storage_key == b.storage_key);
    CHECK(blobs.size() == 1);
    CHECK(s.registry.size() == 2);
  }
  SUBCASE("jpeg is stored as png") {
    const auto rec = register_image(s, blobs, ImageSource::uploaded, file_bytes("small.jpg"), "", 0);
    CHECK(looks_like_png(*blobs.get(rec.storage_key)));
  }
  SUBCASE("bad bytes are rejected without touching the registry") {
    const Bytes junk{0, 1, 2};
    CHECK_THROWS_AS(register_image(s, blobs, ImageSource::uploaded, junk, "", 0), InputError);
    CHECK(s.registry.empty());
    CHECK(s.next_image_number == 1);
  }
}

TEST_CASE("session ids are distinct") {
  CHECK(fresh_session_id() != fresh_session_id());
  const Session s = new_session();
  CHECK(s.turns.empty());
  CHECK(s.registry.empty());
}

TEST_CASE("resolve_history_references") {
  MemoryBlobStore blobs;
  Session s = new_session("h");
  CHECK(resolve_history_references(s, 0).empty());

  Turn t0;
  t0.index = 0;
  s.turns.push_back(t0);
  register_image(s, blobs, ImageSource::uploaded, testing::solid(8, 8, 1, 2, 3), "upload", 0);
  register_image(s, blobs, ImageSource::generated, testing::solid(8, 8, 4, 5, 6), "gen a", 0);
  register_image(s, blobs, ImageSource::generated, testing::solid(8, 8, 7, 8, 9), "gen b", 0);
  CHECK(resolve_history_references(s, 0).empty());
  const auto h = resolve_history_references(s, 1);
  REQUIRE(h.size() == 3);
  CHECK(h[0].id == "img_0001");
  CHECK(h[0].source == ImageSource::uploaded);
  CHECK(h[2].caption == "gen b");
  CHECK_THROWS_AS(resolve_history_references(s, 2), InputError);
}

TEST_CASE("turn status only moves forward") {
  Turn t;
  t.advance(TurnStatus::parsing);
  CHECK_THROWS_AS(t.advance(TurnStatus::executing), std::logic_error);
  t.advance(TurnStatus::planning);
  t.advance(TurnStatus::failed);
  CHECK_THROWS_AS(t.advance(TurnStatus::failed), std::logic_error);
  Turn done;
  done.status = TurnStatus::done;
  CHECK_THROWS_AS(done.advance(TurnStatus::failed), std::logic_error);
}

TEST_CASE("repository round trip") {
  TempDir dir;
  SessionRepository repo(dir.path());

  SUBCASE("create then reload is identical") {
    const Session s = repo.create_session();
    CHECK(repo.exists(s.id));
    CHECK(repo.restore(s.id) == s);
    CHECK(repo.create_session().id != s.id);
  }
  SUBCASE("corrupt json names the file") {
    const Session s = repo.create_session();
    std::ofstream(repo.session_file(s.id)) << "{\"id\": ";
    try {
      repo.restore(s.id);
      FAIL("expected PersistenceError");
    } catch (const PersistenceError& e) {
      CHECK(std::string(e.what()).find("session.json") != std::string::npos);
    }
  }
  SUBCASE("missing blob lists the image id") {
    Session s = repo.create_session();
    register_image(s, *repo.blobs(), ImageSource::uploaded, testing::solid(16, 16, 9, 9, 9), "x", 0);
    const auto rec = register_image(s, *repo.blobs(), ImageSource::uploaded,
                                    testing::solid(16, 16, 1, 1, 1), "y", 0);
    repo.persist(s);
    std::filesystem::remove(repo.blobs()->path_for(rec.storage_key));
    try {
      repo.restore(s.id);
      FAIL("expected IntegrityError");
    } catch (const IntegrityError& e) {
      CHECK(e.ids() == std::vector<std::string>{"img_0002"});
      CHECK(std::string(e.what()).find("img_0002") != std::string::npos);
    }
  }
  SUBCASE("in-flight turns come back failed as interrupted") {
    Session s = repo.create_session();
    Turn t;
    t.user_text = "draw";
    t.advance(TurnStatus::parsing);
    t.events.push_back(TurnEvent{EventKind::parsing_started, 0, Json::object(), 0});
    s.turns.push_back(t);
    repo.persist(s);
    const Session back = repo.restore(s.id);
    CHECK(back.turns[0].status == TurnStatus::failed);
    CHECK(back.turns[0].failure_reason == std::optional<std::string>("interrupted"));
    REQUIRE(back.turns[0].events.size() == 2);
    CHECK(back.turns[0].events[1].kind == EventKind::turn_failed);
    CHECK(back.turns[0].events[1].seq == 1);
  }
  SUBCASE("leftover temp file does not shadow the session") {
    const Session s = repo.create_session();
    std::ofstream(repo.session_file(s.id).string() + ".tmp.1.0") << "garbage";
    CHECK(repo.restore(s.id) == s);
    CHECK(repo.list_sessions() == std::vector<std::string>{s.id});
  }
  SUBCASE("unknown and malformed ids") {
    CHECK_THROWS_AS(repo.restore("nope"), NotFoundError);
    CHECK_THROWS_AS(repo.restore("../etc"), NotFoundError);
  }
}
