import types
import typing


def isinstance_(obj, type_) -> bool:
    """
    `isinstance` that also understands `Optional[...]`, `X | Y`, parametrised generics
    and the usual numeric widening (an int is an acceptable float).
    """
    if type_ is typing.Any:
        return True
    if type_ is float and isinstance(obj, int) and not isinstance(obj, bool):
        return True
    if type_ is int and isinstance(obj, bool):
        return False

    origin = typing.get_origin(type_)
    if origin is None:
        return isinstance(obj, type_)
    if origin is typing.Union or origin is types.UnionType:
        return any(isinstance_(obj, arg) for arg in typing.get_args(type_))
    if origin in (list, tuple):
        if not isinstance(obj, (list, tuple)):
            return False
        args = typing.get_args(type_)
        if not args:
            return True
        if origin is tuple and args[-1] is not Ellipsis:
            return len(obj) == len(args) and all(isinstance_(o, a) for o, a in zip(obj, args))
        return all(isinstance_(o, args[0]) for o in obj)
    if origin is dict:
        if not isinstance(obj, dict):
            return False
        args = typing.get_args(type_)
        if not args:
            return True
        return all(isinstance_(k, args[0]) and isinstance_(v, args[1]) for k, v in obj.items())
    return isinstance(obj, origin)


def type_name(type_) -> str:
    if typing.get_origin(type_) is None and hasattr(type_, '__name__'):
        return type_.__name__
    return str(type_).replace('typing.', '')
