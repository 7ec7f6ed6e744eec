#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "stm/dataset_io.hpp"
#include "stm/similarity.hpp"
#include "stm/split.hpp"

using namespace stm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("stm_core_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

} // namespace

TEST(RatingMatrix, LookupAndMask) {
    RatingMatrix R(3, 4, {{0, 1, 1.0}, {2, 3, 1.0}, {1, 0, 0.5}});
    EXPECT_EQ(R.size(), 3);
    EXPECT_TRUE(R.observed(2, 3));
    EXPECT_FALSE(R.observed(3 - 1, 2));
    EXPECT_EQ(*R.find(1, 0), 2);
    EXPECT_FALSE(R.is_binary());
}

TEST(RatingMatrix, RejectsDuplicatesAndRange) {
    EXPECT_THROW(RatingMatrix(2, 2, {{0, 0, 1.0}, {0, 0, 1.0}}), std::invalid_argument);
    EXPECT_THROW(RatingMatrix(2, 2, {{2, 0, 1.0}}), std::invalid_argument);
    EXPECT_THROW(RatingMatrix(2, 2, {{0, -1, 1.0}}), std::invalid_argument);
}

TEST(RatingIndex, SlicesMatchEntries) {
    RatingMatrix R(3, 3, {{0, 2, 1.0}, {0, 0, 1.0}, {2, 0, 1.0}, {1, 1, 1.0}});
    const std::vector<Index> subset{0, 1, 2};
    RatingIndex idx(R, subset);
    ASSERT_EQ(idx.by_user(0).size(), 2u);
    EXPECT_EQ(idx.by_user(0)[0].other, 0);
    EXPECT_EQ(idx.by_user(0)[1].other, 2);
    EXPECT_TRUE(idx.by_user(1).empty());
    ASSERT_EQ(idx.by_item(0).size(), 2u);
    EXPECT_EQ(idx.by_item(0)[1].other, 2);
    EXPECT_EQ(idx.size(), 3);
}

TEST(SocialGraph, SymmetricStorage) {
    SocialGraph g(4, {{0, 1, 0.5}, {2, 1, 0.25}, {1, 2, 0.25}});
    EXPECT_EQ(g.n_links(), 2);
    EXPECT_EQ(*g.similarity(1, 0), 0.5);
    EXPECT_EQ(*g.similarity(1, 2), 0.25);
    EXPECT_FALSE(g.similarity(0, 3));
    EXPECT_EQ(g.neighbors(1).size(), 2u);
    const auto links = g.links();
    ASSERT_EQ(links.size(), 2u);
    EXPECT_EQ(links[1].a, 1);
    EXPECT_EQ(links[1].b, 2);
    EXPECT_THROW(SocialGraph(2, {{0, 0, 0.5}}), std::invalid_argument);
    EXPECT_THROW(SocialGraph(2, {{0, 1, 1.5}}), std::invalid_argument);
    EXPECT_THROW(SocialGraph(2, {{0, 1, 0.5}, {1, 0, 0.4}}), std::invalid_argument);
}

TEST(Similarity, JaccardFromGroups) {
    GroupMembership g;
    g.universe = {"a", "b", "c"};
    g.groups = {{0, 1}, {1, 2}, {}, {0, 1, 2}};
    const auto S = social_similarity_from_groups(g);
    EXPECT_DOUBLE_EQ(*S.similarity(0, 1), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(*S.similarity(0, 3), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*S.similarity(1, 3), 2.0 / 3.0);
    EXPECT_FALSE(S.similarity(0, 2));
    GroupMembership empty{{"a"}, {{}, {}}};
    EXPECT_THROW(social_similarity_from_groups(empty), std::invalid_argument);
}

TEST(Similarity, TagCosine) {
    TagBag a(5), b(5), z(5);
    a.insert(0) = 1.0;
    a.insert(3) = 1.0;
    b.insert(3) = 2.0;
    EXPECT_NEAR(tag_similarity(a, b), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(tag_similarity(a, a), 1.0, 1e-15);
    EXPECT_THROW(tag_similarity(a, z), std::invalid_argument);
    EXPECT_THROW(tag_similarity(a, TagBag(4)), std::invalid_argument);
}

TEST(Standardize, ZeroMeanUnitVariance) {
    Matrix X(2, 4);
    X << 1, 2, 3, 4, 5, 5, 5, 5;
    FeatureMatrix F(X);
    standardize(F);
    EXPECT_NEAR(F.X.row(0).mean(), 0.0, 1e-15);
    EXPECT_NEAR(F.X.row(0).squaredNorm() / 4.0, 1.0, 1e-12);
    EXPECT_EQ(F.X.row(1).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Hyperparams, Validation) {
    Hyperparams h;
    EXPECT_NO_THROW(h.validate());
    h.lambda_u = -1;
    EXPECT_THROW(h.validate(), std::invalid_argument);
    h = {};
    h.K = 0;
    EXPECT_THROW(h.validate(), std::invalid_argument);
}

TEST(BlockSplit, PartitionAndBlockShape) {
    const auto pm = oracle::tiny_planted(3, 40, 60);
    const auto masks = block_split(pm.data, 11, 0.5, 0.5);
    std::set<Index> all(masks.train.begin(), masks.train.end());
    for (Index e : masks.test) EXPECT_TRUE(all.insert(e).second) << "entry in both train and test";
    EXPECT_EQ(static_cast<Index>(all.size()), pm.data.ratings.size());
    EXPECT_EQ(masks.test_users.size(), 20u);
    EXPECT_EQ(masks.test_items.size(), 30u);
    const std::set<Index> tu(masks.test_users.begin(), masks.test_users.end());
    const std::set<Index> ti(masks.test_items.begin(), masks.test_items.end());
    for (Index e : masks.test) {
        EXPECT_TRUE(tu.count(pm.data.ratings[e].user) && ti.count(pm.data.ratings[e].item));
    }
    for (Index e : masks.train) {
        EXPECT_FALSE(tu.count(pm.data.ratings[e].user) && ti.count(pm.data.ratings[e].item));
    }
    const auto again = block_split(pm.data, 11, 0.5, 0.5);
    EXPECT_EQ(again.test, masks.test);
    EXPECT_NE(block_split(pm.data, 12).test, masks.test);
    EXPECT_THROW(block_split(pm.data, 1, 0.0, 0.5), std::invalid_argument);
}

TEST(SeededPermutation, IsPermutation) {
    auto p = seeded_permutation(100, 5);
    std::sort(p.begin(), p.end());
    for (Index k = 0; k < 100; ++k) EXPECT_EQ(p[static_cast<std::size_t>(k)], k);
}

TEST(Ingest, ReadsAllInputs) {
    TempDir dir;
    const auto r = dir.write("r.csv", "user,item,value\nalice,i2,1\nbob,i1,1\nalice,i1,1\n");
    const auto f = dir.write("f.csv", "item,x,y\ni1,1,2\ni2,3,4\ni3,5,6\n");
    const auto s = dir.write("s.csv", "user_a,user_b,similarity\nalice,bob,0.5\nbob,carol,1\n");
    IngestOptions opt;
    opt.standardize = false;
    const auto data = ingest_dataset(r, f, s, std::nullopt, opt);
    EXPECT_EQ(data.n_users(), 3);
    EXPECT_EQ(data.n_items(), 3);
    EXPECT_EQ(data.user_ids, (std::vector<std::string>{"alice", "bob", "carol"}));
    EXPECT_TRUE(data.ratings.observed(0, 1));
    EXPECT_TRUE(data.ratings.observed(1, 0));
    EXPECT_FALSE(data.ratings.observed(1, 1));
    EXPECT_EQ(data.features.X(1, 2), 6.0);
    EXPECT_EQ(*data.social->similarity(1, 2), 1.0);
}

TEST(Ingest, MalformedRowsCarryLineNumbers) {
    TempDir dir;
    const auto f = dir.write("f.csv", "item,x\ni1,1\ni2,2\n");
    const auto bad = dir.write("r.csv", "user,item,value\nu,i1,1\nu,i2\n");
    try {
        ingest_dataset(bad, f);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    const auto dup = dir.write("d.csv", "user,item,value\nu,i1,1\nv,i2,1\nu,i1,1\n");
    try {
        ingest_dataset(dup, f);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    const auto unknown = dir.write("u.csv", "user,item,value\nu,i9,1\n");
    EXPECT_THROW(ingest_dataset(unknown, f), SchemaError);
    const auto ragged = dir.write("g.csv", "item,x,y\ni1,1,2\ni2,3\n");
    EXPECT_THROW(ingest_dataset(dir.write("ok.csv", "user,item,value\nu,i1,1\n"), ragged), SchemaError);
    EXPECT_THROW(ingest_dataset(dir.path / "missing.csv", f), FileError);
    EXPECT_THROW(ingest_dataset(dir.write("h.csv", "who,what,score\n"), f), ParseError);
}

TEST(Ingest, RoundTripThroughDataDir) {
    TempDir dir;
    auto pm = oracle::tiny_planted(4);
    pm.data.groups = GroupMembership{{"g0", "g1"}, {}};
    pm.data.groups->groups.resize(static_cast<std::size_t>(pm.data.n_users()));
    for (Index i = 0; i < pm.data.n_users(); ++i) pm.data.groups->groups[static_cast<std::size_t>(i)] = {i % 2};
    for (auto format : {FeatureFormat::csv, FeatureFormat::binary}) {
        const auto out = dir.path / (format == FeatureFormat::csv ? "csv" : "bin");
        write_data_dir(pm.data, out, format);
        IngestOptions opt;
        opt.standardize = false;
        const auto back = load_data_dir(out, opt);
        EXPECT_TRUE(back.ratings == pm.data.ratings);
        EXPECT_TRUE(*back.social == *pm.data.social);
        EXPECT_TRUE(*back.groups == *pm.data.groups);
        EXPECT_EQ(back.user_ids, pm.data.user_ids);
        const double tol = format == FeatureFormat::csv ? 0.0 : 1e-6;
        EXPECT_LE((back.features.X - pm.data.features.X).cwiseAbs().maxCoeff(),
                  tol * pm.data.features.X.cwiseAbs().maxCoeff());
    }
}

TEST(Ingest, SocialDerivedFromGroupsWhenAbsent) {
    TempDir dir;
    dir.write("ratings.csv", "user,item,value\na,x,1\nb,x,1\nc,x,1\n");
    dir.write("features.csv", "item,f\nx,1\n");
    dir.write("groups.csv", "user,group\na,g1\nb,g1\nb,g2\nc,g3\n");
    const auto data = load_data_dir(dir.path);
    ASSERT_TRUE(data.social);
    EXPECT_DOUBLE_EQ(*data.social->similarity(0, 1), 0.5);
    EXPECT_EQ(data.social->n_links(), 1);
}

TEST(FeaturesBinary, RejectsBadHeader) {
    TempDir dir;
    const auto f = dir.write("bad.bin", "NOPE0000000000000000");
    EXPECT_THROW(read_features_binary(f), SchemaError);
    EXPECT_THROW(read_features_binary(dir.path / "none.bin"), FileError);
}
