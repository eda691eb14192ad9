class Template:
    run_summary = """# Recalibration run: {{ report.variant }}

- Horizon: {{ report.horizon }} steps
- Levels: {{ report.levels | join(", ") }}
- Calibration error: {{ "%.6f" | format(report.calibration_error) }}
- Average quantile loss: {{ "%.6f" | format(report.quantile_loss) }}
- Crossing fraction (raw forecasts): {{ "%.4f" | format(report.crossing_fraction) }}
{% if report.pit_entropy is not none -%}
- PIT entropy: {{ "%.4f" | format(report.pit_entropy) }}{% if report.pit_degenerate_steps %} ({{ report.pit_degenerate_steps }} fully tied steps){% endif %}
{% endif -%}
{% if report.regret -%}
- Regret vs {{ report.regret.comparator_kind }} comparator: {{ "%.6f" | format(report.regret.value) }}{% if report.regret.fallback %} (fell back to zero offsets){% endif %}
{% endif %}
| level | coverage | gap |
|------:|---------:|----:|
{% for level, coverage, gap in rows -%}
| {{ level }} | {{ "%.4f" | format(coverage) }} | {{ "%.4f" | format(gap) }} |
{% endfor %}
{% if report.bounds %}
| bound | value | observed | held | guaranteed |
|-------|------:|---------:|:----:|:----------:|
{% for name, check in report.bounds.items() -%}
| {{ name }} | {{ "%.6f" | format(check.value) }} | {{ "%.6f" | format(check.observed) }} | {{ "yes" if check.held else "no" }} | {{ "yes" if check.applies else "no" }} |
{% endfor %}
{% endif %}"""

    comparison_summary = """# Scenario: {{ summary.scenario }}

- Levels: {{ summary.levels | join(", ") }}
- Horizon: {{ summary.horizon }} steps
- Residual bound: {{ summary.residual_bound }}

| variant | coverage | max gap | calibration bound | within bound |
|---------|----------|--------:|------------------:|:------------:|
{% for row in summary.rows -%}
| {{ row.variant }} | {{ row.coverage | map("round", 4) | join(" / ") }} | {{ "%.4f" | format(row.max_gap) }} | {{ "%.4f" | format(row.calibration_bound) }} | {{ "yes" if row.within_bound else "no" }} |
{% endfor %}"""
