#include <doctest.h>

#include "agentperm/html.hpp"
#include "support.hpp"

using namespace agentperm;
using namespace testsupport;

TEST_CASE("parse_html: elements, attributes, nesting") {
    HtmlDocument doc = parse_html("<html><body><div id=\"a\" class='x y'><p>hi</p></div></body></html>");
    auto els = all_elements(doc);
    REQUIRE(els.size() == 4);  // html, body, div, p
    CHECK(els[0]->tag == "html");
    CHECK(els[2]->tag == "div");
    REQUIRE(els[2]->attr("id"));
    CHECK(*els[2]->attr("id") == "a");
    CHECK(*els[2]->attr("class") == "x y");
    CHECK(els[3]->parent == els[2]);
}

TEST_CASE("parse_html: implied html > body wrapper") {
    HtmlDocument doc = parse_html("<div><span>x</span></div>");
    auto els = all_elements(doc);
    REQUIRE(els.size() >= 4);
    CHECK(els[0]->tag == "html");
    CHECK(els[1]->tag == "body");
    CHECK(els[2]->tag == "div");
}

TEST_CASE("parse_html: tolerance") {
    // comments, doctype, script content, void elements, unmatched close tags
    HtmlDocument doc = parse_html(
        "<!DOCTYPE html><!-- c --><html><head><script>if (a<b) {}</script></head>"
        "<body><br><img src=x></span><p>ok &amp; fine</p></body></html>");
    auto els = all_elements(doc);
    bool saw_br = false, saw_p = false;
    for (const HtmlNode* el : els) {
        if (el->tag == "br") saw_br = true;
        if (el->tag == "p") {
            saw_p = true;
            CHECK(own_text(*el) == "ok & fine");
        }
        if (el->tag == "script") CHECK(el->children.empty());  // raw text skipped
    }
    CHECK(saw_br);
    CHECK(saw_p);
}

TEST_CASE("own_text: direct text children only, whitespace collapsed") {
    HtmlDocument doc = parse_html("<div>  Buy\n  <b>now</b>  today  </div>");
    const HtmlNode* div = query_first(doc, parse_selector("div"));
    REQUIRE(div);
    CHECK(own_text(*div) == "Buy today");
    const HtmlNode* b = query_first(doc, parse_selector("b"));
    REQUIRE(b);
    CHECK(own_text(*b) == "now");
}

TEST_CASE("query_all: document order") {
    HtmlDocument doc = parse_html("<ul><li id=a></li><li id=b></li><li id=c></li></ul>");
    auto hits = query_all(doc, parse_selector("li"));
    REQUIRE(hits.size() == 3);
    CHECK(*hits[0]->attr("id") == "a");
    CHECK(*hits[2]->attr("id") == "c");
}

TEST_CASE("element_from_html: direct construction") {
    ElementDescriptor el = element_from_html("<button id=\"post\">Post</button>", "#post");
    CHECK(el.tag == "button");
    CHECK(el.id == "post");
}

TEST_CASE("element_from_html: ancestors chain from nested fixture") {
    ElementDescriptor el = element_from_html(read_fixture("nested.html"), ".x");
    CHECK(el.tag == "a");
    REQUIRE(el.ancestors.size() == 5);
    CHECK(el.ancestors[0].tag == "li");
    CHECK(el.ancestors[1].tag == "ul");
    CHECK(el.ancestors[2].tag == "nav");
    CHECK(el.ancestors[3].tag == "body");
    CHECK(el.ancestors[4].tag == "html");
}

TEST_CASE("element_from_html: no match and ambiguity") {
    CHECK_THROWS_AS(element_from_html("<div></div>", ".missing"), LookupError);

    bool ambiguous = false;
    ElementDescriptor el =
        element_from_html("<p class=x>first</p><p class=x>second</p>", ".x", &ambiguous);
    CHECK(ambiguous);
    CHECK(el.tag == "p");  // first match returned

    ambiguous = true;
    element_from_html("<p class=x>only</p>", ".x", &ambiguous);
    CHECK(!ambiguous);
}

TEST_CASE("describe: classes and attributes surface") {
    HtmlDocument doc = parse_html("<a class=\"x  y\" href=\"/h\" ID=Z>t</a>");
    const HtmlNode* a = query_first(doc, parse_selector("a"));
    REQUIRE(a);
    ElementDescriptor d = describe(*a);
    CHECK(d.classes == std::set<std::string>{"x", "y"});
    CHECK(d.id == "Z");                    // attribute name lowercased, value kept
    CHECK(d.attributes.at("href") == "/h");
    CHECK(d.attributes.at("class") == "x  y");
    CHECK(d.attributes.at("id") == "Z");
}
