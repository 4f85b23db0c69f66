"""PDDL sources for the VKC domain and the conventional (base + arm) domain."""
from __future__ import annotations

import warnings

from ..pddl import DomainDef, parse

VKC_DOMAIN = """\
(define (domain vkc)
  (:types chain config state - object
          vkc - chain
          obj - vkc)
  (:predicates
    (vkcState ?r - chain ?q - config)
    (objConf ?o - obj ?s - state)
    (free ?v - vkc)
    (carry ?o - obj ?v - vkc)
    (occupied ?s - state)
    (graspable ?o - obj ?v - vkc)
    (reachable ?s - state ?v - vkc)
    (placeable ?o - obj ?s - state)
    (rigidObj ?o - obj)
    (artiObj ?o - obj)
    (toolObj ?o - obj)
    (carried ?o - obj)
    (containSpace ?o - obj ?s - state))

  (:action goto-vkc
    :parameters (?r - chain ?from - config ?to - config)
    :precondition (vkcState ?r ?from)
    :effect (and (vkcState ?r ?to)
                 (not (vkcState ?r ?from))))

  ; an attached object extends the chain; (free ?o) marks it usable as one
  (:action pick-vkc
    :parameters (?o - obj ?s - state ?v - vkc)
    :precondition (and (objConf ?o ?s)
                       (free ?v)
                       (graspable ?o ?v)
                       (reachable ?s ?v))
    :effect (and (carry ?o ?v)
                 (not (objConf ?o ?s))
                 (not (free ?v))
                 (not (occupied ?s))
                 (free ?o)))

  (:action place-vkc
    :parameters (?o - obj ?s - state ?v - vkc)
    :precondition (and (carry ?o ?v)
                       (free ?o)
                       (not (occupied ?s))
                       (placeable ?o ?s)
                       (reachable ?s ?v))
    :effect (and (not (carry ?o ?v))
                 (objConf ?o ?s)
                 (free ?v)
                 (occupied ?s)
                 (not (free ?o)))))
"""

CONVENTIONAL_DOMAIN = """\
(define (domain conventional)
  (:types obj state base - object)
  (:predicates
    (objConf ?o - obj ?s - state)
    (robotAt ?b - base)
    (holding ?o - obj)
    (handEmpty)
    (occupied ?s - state)
    (placeable ?o - obj ?s - state)
    (rigidObj ?o - obj)
    (artiObj ?o - obj)
    (isOpen ?o - obj)
    (hasTool ?b - base)
    (ableToPick ?b - base)
    (reachable ?s - state ?b - base))

  (:action move
    :parameters (?s1 - base ?s2 - base)
    :precondition (robotAt ?s1)
    :effect (and (robotAt ?s2)
                 (not (robotAt ?s1))))

  (:action pick
    :parameters (?o - obj ?s1 - state ?s2 - base)
    :precondition (and (objConf ?o ?s1)
                       (rigidObj ?o)
                       (robotAt ?s2)
                       (reachable ?s1 ?s2)
                       (ableToPick ?s2)
                       (handEmpty))
    :effect (and (holding ?o)
                 (not (objConf ?o ?s1))
                 (not (occupied ?s1))
                 (not (handEmpty))))

  (:action place
    :parameters (?o - obj ?s1 - state ?s2 - base)
    :precondition (and (holding ?o)
                       (robotAt ?s2)
                       (reachable ?s1 ?s2)
                       (placeable ?o ?s1)
                       (not (occupied ?s1)))
    :effect (and (objConf ?o ?s1)
                 (occupied ?s1)
                 (handEmpty)
                 (not (holding ?o))))

  (:action open
    :parameters (?o - obj ?s1 - state ?s2 - base)
    :precondition (and (objConf ?o ?s1)
                       (artiObj ?o)
                       (robotAt ?s2)
                       (reachable ?s1 ?s2)
                       (handEmpty)
                       (not (isOpen ?o)))
    :effect (isOpen ?o))

  (:action close
    :parameters (?o - obj ?s1 - state ?s2 - base)
    :precondition (and (objConf ?o ?s1)
                       (artiObj ?o)
                       (robotAt ?s2)
                       (reachable ?s1 ?s2)
                       (handEmpty)
                       (isOpen ?o))
    :effect (not (isOpen ?o))))
"""


def _parse_quiet(text: str) -> DomainDef:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = parse(text)
    assert isinstance(d, DomainDef)
    return d


def make_vkc_domain() -> DomainDef:
    return _parse_quiet(VKC_DOMAIN)


def make_conventional_domain() -> DomainDef:
    return _parse_quiet(CONVENTIONAL_DOMAIN)
