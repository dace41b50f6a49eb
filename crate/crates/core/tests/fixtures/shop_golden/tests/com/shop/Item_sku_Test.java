package com.shop;

import org.junit.Test;

public class Item_sku_Test {

    @Test
    public void testSku() throws Exception {
        Item target = new Item("", (Money) null);
        target.sku();
        org.junit.Assert.assertNotNull(target);
    }
}
