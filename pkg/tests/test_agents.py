"""Agent registry contents, file format, and uniqueness rules."""

import pytest

from consent_audit.agents import (
    Purpose,
    RegistryConflictError,
    RegistryParseError,
    default_policy_sets,
    default_registry,
    load_registry,
    lookup,
    serialize_registry,
)


class TestDefaultRegistry:
    def test_gptbot_entry(self):
        entry = lookup(default_registry(), "GPTBot")
        assert entry.organization == "OpenAI"
        assert entry.purpose == frozenset({Purpose.TRAINING})
        assert entry.official is True

    def test_false_anthropic_tokens_are_unofficial(self):
        reg = default_registry()
        for token in ("anthropic-ai", "Claude-Web"):
            entry = lookup(reg, token)
            assert entry.organization == "False Anthropic"
            assert entry.official is False

    def test_unknown_token_absent(self):
        assert lookup(default_registry(), "NoSuchBot") is None

    def test_tracked_token_set(self):
        tokens = {e.agent_token for e in default_registry()}
        assert tokens == {
            "GPTBot", "ChatGPT-User", "Google-Extended", "Googlebot", "CCBot",
            "ClaudeBot", "anthropic-ai", "Claude-Web", "FacebookBot",
            "cohere-ai", "ia_archiver", "*",
        }

    def test_case_insensitive_uniqueness(self):
        lowered = [e.agent_token.lower() for e in default_registry()]
        assert len(lowered) == len(set(lowered))

    def test_every_org_has_an_entry(self):
        orgs = {e.organization for e in default_registry()}
        assert {"OpenAI", "Google", "Google Search", "Common Crawl", "Anthropic",
                "False Anthropic", "Meta", "Cohere", "Internet Archive"} <= orgs

    def test_anthropic_policy_binds_ccbot(self):
        sets = {ps.organization: ps.member_tokens for ps in default_policy_sets()}
        assert sets["Anthropic"] == ("ClaudeBot", "CCBot")
        assert sets["False Anthropic"] == ("anthropic-ai", "Claude-Web")


class TestLoadRegistry:
    def test_extension_adds_entry(self, tmp_path):
        path = tmp_path / "extra.tsv"
        path.write_text("Amazon\tAmazonbot\ttrue\ttraining\t-\n")
        entries = load_registry(path)
        assert len(entries) == len(default_registry()) + 1
        assert lookup(entries, "Amazonbot").organization == "Amazon"

    def test_empty_file_leaves_default(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("")
        assert load_registry(path) == default_registry()

    def test_conflicting_redefinition_rejected(self, tmp_path):
        path = tmp_path / "conflict.tsv"
        path.write_text("EvilCorp\tGPTBot\ttrue\ttraining\t-\n")
        with pytest.raises(RegistryConflictError):
            load_registry(path)

    def test_case_insensitive_conflict(self, tmp_path):
        path = tmp_path / "conflict.tsv"
        path.write_text("EvilCorp\tgptbot\ttrue\ttraining\t-\n")
        with pytest.raises(RegistryConflictError):
            load_registry(path)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("# fine\nAmazon\tAmazonbot\tmaybe\ttraining\t-\n")
        with pytest.raises(RegistryParseError) as exc_info:
            load_registry(path)
        assert exc_info.value.line == 2

    def test_unknown_purpose_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("Amazon\tAmazonbot\ttrue\tsnorkeling\t-\n")
        with pytest.raises(RegistryParseError):
            load_registry(path)

    def test_round_trip(self, tmp_path):
        first = serialize_registry(default_registry())
        path = tmp_path / "reg.tsv"
        path.write_text(first)
        assert serialize_registry(load_registry(path)) == first

    def test_uniqueness_after_any_load(self, tmp_path):
        path = tmp_path / "extra.tsv"
        path.write_text(
            "Amazon\tAmazonbot\ttrue\ttraining\t-\n"
            "Apple\tApplebot\ttrue\tweb_search\t-\n"
        )
        entries = load_registry(path)
        lowered = [e.agent_token.lower() for e in entries]
        assert len(lowered) == len(set(lowered))
