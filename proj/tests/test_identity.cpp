#include <contribsum/error.hpp>
#include <contribsum/identity.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace contribsum;

namespace {

const char* kTwoStudents =
    "# course roster\n"
    "ana | Ana Lima | ana@uni.edu, ana.lima@gmail.com\n"
    "\n"
    "bo | Bo Chen | bo@uni.edu\n";

}  // namespace

TEST(Roster, TwoStudentsThreeEmails) {
    auto r = load_roster(kTwoStudents);
    ASSERT_EQ(r.students.size(), 2u);
    EXPECT_EQ(r.email_aliases.size(), 3u);
    EXPECT_EQ(r.students[0], (StudentId{"ana", "Ana Lima"}));
}

TEST(Roster, SameEmailUnderTwoStudentsIsDuplicate) {
    EXPECT_THROW(load_roster("a | A | x@y.z\nb | B | X@y.z\n"), DuplicateAlias);
}

TEST(Roster, MalformedLineNamesTheLine) {
    try {
        load_roster("a | A | a@x.y\n\nbroken line\n");
        FAIL();
    } catch (const MalformedRoster& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Roster, RejectsReservedIdAndDuplicates) {
    EXPECT_THROW(load_roster("unmapped | U | u@x.y\n"), MalformedRoster);
    EXPECT_THROW(load_roster("a | A | a@x.y\na | A2 | b@x.y\n"), MalformedRoster);
    EXPECT_THROW(load_roster("a | A | not-an-email\n"), MalformedRoster);
}

TEST(Roster, SharedDisplayNameIsNotAnAlias) {
    auto r = load_roster("a | Sam | a@x.y\nb | Sam | b@x.y\n");
    EXPECT_FALSE(resolve(r, "Sam", "nobody@x.y"));
    EXPECT_EQ(resolve(r, "Sam", "b@x.y")->id, "b");
}

TEST(Resolve, MixedCaseEmailMatchesManualLowercase) {
    auto r = load_roster("a | A | a@x.com\n");
    std::string mixed = "A@X.com";
    std::string lowered;
    for (char c : mixed) lowered += (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c;
    EXPECT_EQ(resolve(r, "", mixed), resolve(r, "", lowered));
    EXPECT_EQ(resolve(r, "", mixed)->id, "a");
}

TEST(Resolve, EmailThenNameThenUnknown) {
    auto r = load_roster(kTwoStudents);
    EXPECT_EQ(resolve(r, "Whoever", "bo@uni.edu")->id, "bo");
    EXPECT_EQ(resolve(r, "ana lima", "laptop@local")->id, "ana");
    EXPECT_FALSE(resolve(r, "CI Bot", "ci-bot@builds.example.com"));
}

TEST(Resolve, EmailWinsOverConflictingName) {
    auto r = load_roster(kTwoStudents);
    EXPECT_EQ(resolve(r, "Ana Lima", "bo@uni.edu")->id, "bo");
}

TEST(CoAuthors, NoTrailers) { EXPECT_TRUE(parse_coauthors("Fix login\n\nDetails here.").empty()); }

TEST(CoAuthors, OneTrailer) {
    auto tags = parse_coauthors("Pair on search\n\nCo-authored-by: Ana <ana@x.com>\n", "abc");
    ASSERT_EQ(tags.size(), 1u);
    EXPECT_EQ(tags[0], (CoAuthorTag{"Ana", "ana@x.com", "abc"}));
}

TEST(CoAuthors, TwoTrailersInMessageOrder) {
    auto tags = parse_coauthors("m\n\nCo-authored-by: Zed <z@x.com>\nco-authored-by: Amy Li <amy@x.com>");
    ASSERT_EQ(tags.size(), 2u);
    EXPECT_EQ(tags[0].name, "Zed");
    EXPECT_EQ(tags[1].name, "Amy Li");
}

TEST(CoAuthors, MalformedTrailersIgnored) {
    EXPECT_TRUE(parse_coauthors("Co-authored-by: NoEmail\nCo-authored-by: <x@y.z>\nSee Co-authored-by: A <a@b.c>")
                    .empty());
}

// Properties over generated rosters and messages.

namespace {

std::string random_word(std::mt19937& rng, std::size_t max_len = 8) {
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJ";
    std::uniform_int_distribution<std::size_t> len(1, max_len), pick(0, alphabet.size() - 1);
    std::string s;
    for (auto n = len(rng); n > 0; --n) s += alphabet[pick(rng)];
    return s;
}

std::string random_roster(std::mt19937& rng) {
    std::string doc;
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    for (int i = 0; i < n; ++i) {
        doc += "s" + std::to_string(i) + " | " + random_word(rng) + " " + random_word(rng) + " | ";
        const int emails = std::uniform_int_distribution<int>(0, 3)(rng);
        for (int e = 0; e < emails; ++e) {
            if (e) doc += ", ";
            doc += random_word(rng) + std::to_string(i) + "." + std::to_string(e) + "@" + random_word(rng) + ".edu";
        }
        doc += "\n";
    }
    return doc;
}

}  // namespace

TEST(IdentityProperty, SerializeReloadKeepsAliasMaps) {
    std::mt19937 rng(7);
    for (int round = 0; round < 200; ++round) {
        auto r = load_roster(random_roster(rng));
        auto again = load_roster(serialize_roster(r));
        EXPECT_EQ(again.students, r.students);
        EXPECT_EQ(again.email_aliases, r.email_aliases);
        EXPECT_EQ(again.name_aliases, r.name_aliases);
    }
}

TEST(IdentityProperty, ResolveIsPureAndAliasesPointAtOneStudent) {
    std::mt19937 rng(11);
    for (int round = 0; round < 200; ++round) {
        auto r = load_roster(random_roster(rng));
        for (const auto& [email, id] : r.email_aliases) {
            auto a = resolve(r, "", email);
            ASSERT_TRUE(a);
            EXPECT_EQ(a->id, id);
            EXPECT_EQ(resolve(r, "", email), a);
        }
        auto probe = random_word(rng);
        EXPECT_EQ(resolve(r, probe, probe + "@nowhere"), resolve(r, probe, probe + "@nowhere"));
    }
}

TEST(IdentityProperty, TrailerTagsAreBoundedAndVerbatim) {
    std::mt19937 rng(3);
    for (int round = 0; round < 300; ++round) {
        std::string message = random_word(rng) + "\n";
        const int lines = std::uniform_int_distribution<int>(0, 6)(rng);
        for (int i = 0; i < lines; ++i) {
            switch (rng() % 4) {
                case 0: message += "Co-authored-by: " + random_word(rng) + " <" + random_word(rng) + "@x.y>\n"; break;
                case 1: message += "co-authored-by:" + random_word(rng) + "\n"; break;
                case 2: message += random_word(rng) + " " + random_word(rng) + "\n"; break;
                default: message += "\n";
            }
        }
        auto tags = parse_coauthors(message);
        EXPECT_LE(tags.size(), std::size_t(std::count(message.begin(), message.end(), '\n') + 1));
        for (const auto& t : tags) EXPECT_NE(message.find(t.email), std::string::npos);
    }
}
