from typing import Dict, Any


def options_with_default(options: Dict[str, Any], default_options: Dict[str, Any]) -> Dict[str, Any]:
    """
    Recursively overlay `options` on `default_options`. Nested dicts merge key by key,
    everything else in `options` replaces the default.
    """
    if default_options is None:
        return dict(options) if options is not None else {}
    if options is None:
        return deep_copy(default_options)

    merged = deep_copy(default_options)
    for key, value in options.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = options_with_default(value, merged[key])
        else:
            merged[key] = value
    return merged


def deep_copy(d: Dict[str, Any]) -> Dict[str, Any]:
    return {k: deep_copy(v) if isinstance(v, dict) else (list(v) if isinstance(v, list) else v)
            for k, v in d.items()}
