// A linked list whose payloads are null or objects with int/float fields.
function make(n) {
    var head = null;
    for (var i = 0; i < n; i++) {
        var v = i % 3 == 0 ? null : (i % 3 == 1 ? { w: i } : { w: i + 0.5 });
        head = { value: v, next: head };
    }
    return head;
}

function weigh(list) {
    var w = 0;
    var node = list;
    while (node != null) {
        var v = node.value;
        if (v == null) {
            w = w + 1;
        } else {
            w = w + v.w;
        }
        node = node.next;
    }
    return w;
}

function main() {
    var list = make(90);
    return weigh(list) + weigh(list);
}
